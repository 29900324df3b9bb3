#include <cstdio>

int main() {
    std::puts("nmpcmc: command-line interface not wired up yet");
    return 0;
}
