// Compile-coverage smoke test: pulls in every public header.
#include <gtest/gtest.h>

#include "vid/pipeline.hpp"

TEST(Smoke, HeadersCompile) {
  vid::PipelineConfig cfg;
  EXPECT_EQ(cfg.seed, 42u);
}
