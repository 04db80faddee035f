void png_set_sPLT(png_structp png_ptr)
{
#ifdef SPLT
#  ifdef POINTER
   png_sPLT_tp p;
#  else
   png_sPLT_t p;
#  endif
   use(p);
#endif
}
