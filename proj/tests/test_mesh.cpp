#include <catch2/catch_amalgamated.hpp>
#include "umitk/mesh.hpp"
#include "umitk/solver.hpp"
#include "umitk/roi.hpp"
#include "umitk/umi.hpp"
#include "umitk/stats.hpp"
#include "umitk/synthetic.hpp"
#include "umitk/cohort.hpp"
#include "umitk/pipeline.hpp"
TEST_CASE("smoke", "[mesh]") { REQUIRE(1 == 1); }
