#pragma once

#include "vpcc/acs.hpp"
#include "vpcc/certify.hpp"
#include "vpcc/config.hpp"
#include "vpcc/conic.hpp"
#include "vpcc/distribution.hpp"
#include "vpcc/errors.hpp"
#include "vpcc/moments.hpp"
#include "vpcc/problem.hpp"
#include "vpcc/random_matrix.hpp"
#include "vpcc/reformulate.hpp"
#include "vpcc/report.hpp"
#include "vpcc/scenario.hpp"
