#include <cstdio>
int main() { std::puts("logsieve: cli under construction"); return 2; }
