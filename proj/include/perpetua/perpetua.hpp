#pragma once

#include "perpetua/ax1.hpp"
#include "perpetua/bounds.hpp"
#include "perpetua/error.hpp"
#include "perpetua/iterator.hpp"
#include "perpetua/lattice.hpp"
#include "perpetua/model.hpp"
#include "perpetua/oracle.hpp"
#include "perpetua/presets.hpp"
#include "perpetua/quickselect.hpp"
#include "perpetua/report.hpp"
