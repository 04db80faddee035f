/* Three options, four optional blocks. */
#ifdef A
code_1();
#endif
#ifdef B
code_2();
#else
code_3();
#endif
#ifdef C
code_4();
#endif
