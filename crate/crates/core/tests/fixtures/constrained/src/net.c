#ifdef NET
int net_init(void);
#ifdef IPV6
int ipv6_route(void);
#endif
#ifndef WIFI
int wired_only(void);
#endif
#endif
