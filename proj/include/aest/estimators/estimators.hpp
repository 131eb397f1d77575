#pragma once

#include "aest/estimators/conditional.hpp"
#include "aest/estimators/fgan.hpp"
#include "aest/estimators/gel.hpp"
#include "aest/estimators/moment.hpp"
#include "aest/estimators/riesz.hpp"
#include "aest/estimators/sbeed.hpp"
