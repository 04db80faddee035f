#if defined(C) && defined(D)
int cd;
#endif
#ifdef C
int c;
#endif
