#include <doctest.h>
TEST_SUITE_BEGIN("tuning");
TEST_SUITE_END();
