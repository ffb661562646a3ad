#include <doctest.h>
TEST_SUITE_BEGIN("inference");
TEST_SUITE_END();
