#pragma once

#include "mfg/ensemble.hpp"
#include "mfg/measure.hpp"

#include <optional>

namespace mfg::detail {

// Either a view of the frozen flow or an owned copy of the current slice.
struct NodeMeasure {
  std::optional<EmpiricalMeasure> owned;
  const EmpiricalMeasure* ptr = nullptr;

  NodeMeasure(const PathEnsemble& e, const MeasureFlow* flow, int j, int p) {
    if (flow != nullptr) {
      ptr = &flow->at(j, p);
    } else {
      owned.emplace(e.slice(j, p));
      ptr = &*owned;
    }
  }
  const EmpiricalMeasure& operator*() const { return *ptr; }
};

}  // namespace mfg::detail
