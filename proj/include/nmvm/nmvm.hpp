#pragma once

#include "nmvm/allocation.hpp"
#include "nmvm/distribution.hpp"
#include "nmvm/error.hpp"
#include "nmvm/io.hpp"
#include "nmvm/mixing.hpp"
#include "nmvm/numeric.hpp"
#include "nmvm/oracle.hpp"
#include "nmvm/special.hpp"
#include "nmvm/tail_moments.hpp"
