#ifdef SLAB
void *slab_alloc(int);
#else
void *page_alloc(int);
#endif
#ifdef SLUB
void slub_debug(void);
#endif
