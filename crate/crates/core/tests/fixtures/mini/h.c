#ifdef P
#ifdef Q
int pq;
#endif
#endif
#ifdef R
int r;
#endif
