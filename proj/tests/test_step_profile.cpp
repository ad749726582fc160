#include <doctest.h>
TEST_SUITE("step_profile") {}
