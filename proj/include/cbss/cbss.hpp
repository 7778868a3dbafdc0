#pragma once

#include "cbss/christoffel.hpp"
#include "cbss/evalmetrics.hpp"
#include "cbss/experiment.hpp"
#include "cbss/ica.hpp"
#include "cbss/io.hpp"
#include "cbss/polybasis.hpp"
#include "cbss/synthdata.hpp"

namespace cbss {

inline constexpr const char* version = "0.1.0";

}  // namespace cbss
