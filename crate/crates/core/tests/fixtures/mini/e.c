#if G
int g;
#elif H
int h;
#else
int none;
#endif
