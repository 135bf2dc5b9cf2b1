#include <catch2/catch_amalgamated.hpp>

#include "coarse/covers.hpp"
#include "coarse/mapcheck.hpp"

using namespace coarse;

TEST_CASE("line space evaluates a halfspace") {
  auto space = Space::make_line();
  Context ctx(space, TruncationGrid::defaults_for(*space));
  auto right = SubsetExpr::halfspace({1}, 0);
  const DynBitset& bits = ctx.eval(right);
  REQUIRE(bits.count() > 0);
  REQUIRE(bits.count() < ctx.universe().size());
}
