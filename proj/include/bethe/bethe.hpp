#pragma once

// Umbrella header for the whole library.

#include "bethe/beliefs.hpp"
#include "bethe/error.hpp"
#include "bethe/gbp.hpp"
#include "bethe/json_io.hpp"
#include "bethe/model.hpp"
#include "bethe/oracle.hpp"
#include "bethe/poset.hpp"
#include "bethe/reduce.hpp"
