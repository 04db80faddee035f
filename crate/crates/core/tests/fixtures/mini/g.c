#if L && M && N
int lmn;
#endif
#if !L && !M
int none;
#endif
