#ifdef I
int i;
#endif
#ifdef J
int j;
#else
int nj;
#endif
#ifdef K
int k;
#endif
