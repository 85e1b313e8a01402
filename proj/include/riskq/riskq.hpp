#pragma once

#include "riskq/error.hpp"
#include "riskq/norm.hpp"
#include "riskq/parallel.hpp"
#include "riskq/network.hpp"
#include "riskq/property.hpp"
#include "riskq/mads.hpp"
#include "riskq/constrained.hpp"
#include "riskq/quantifier.hpp"
#include "riskq/model_io.hpp"
#include "riskq/csv.hpp"
