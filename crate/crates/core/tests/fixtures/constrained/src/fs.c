#if defined(EXT4) && defined(JOURNAL)
int journal_commit(void);
#elif defined(FAT)
int fat_lookup(void);
#else
int ramfs_only(void);
#endif
