#pragma once

#include <scsc/applications.hpp>
#include <scsc/core.hpp>
#include <scsc/drivers.hpp>
#include <scsc/filter_update.hpp>
#include <scsc/io.hpp>
#include <scsc/lasso.hpp>
#include <scsc/operators.hpp>
#include <scsc/rng.hpp>
#include <scsc/synthetic.hpp>
