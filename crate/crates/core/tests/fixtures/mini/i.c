#ifdef S
int s;
#endif
