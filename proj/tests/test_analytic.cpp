#include <doctest.h>
TEST_SUITE("analytic") {}
