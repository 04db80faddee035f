#ifndef B
int b0;
#else
int b1;
#endif
