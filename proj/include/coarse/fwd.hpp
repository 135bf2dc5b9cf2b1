#pragma once

#include <memory>

namespace coarse {

struct SubsetExpr;
struct CoarseMapSpec;
struct EndpointSpec;
class Space;
class Context;

using SubsetPtr = std::shared_ptr<const SubsetExpr>;
using MapPtr = std::shared_ptr<const CoarseMapSpec>;
using EndpointPtr = std::shared_ptr<const EndpointSpec>;
using SpacePtr = std::shared_ptr<const Space>;

}  // namespace coarse
