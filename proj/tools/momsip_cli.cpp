#include <cstdio>
int main(){ std::puts("momsip placeholder"); return 0; }
