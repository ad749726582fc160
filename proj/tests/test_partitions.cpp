#include <doctest.h>
TEST_SUITE("partitions") {}
