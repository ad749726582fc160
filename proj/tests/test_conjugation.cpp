#include <doctest.h>
TEST_SUITE("conjugation") {}
