#ifdef SMP
int cpu_count;
#ifdef NUMA
int node_distance(int, int);
#endif
#endif
#ifndef PREEMPT
void cond_resched(void);
#endif
