#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "mnmt/common.hpp"

int main(int argc, char** argv) {
  mnmt::set_warning_sink([](std::string_view) {});
  doctest::Context context(argc, argv);
  return context.run();
}
