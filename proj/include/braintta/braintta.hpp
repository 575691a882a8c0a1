#pragma once

#include "braintta/assembler.hpp"
#include "braintta/config.hpp"
#include "braintta/energy.hpp"
#include "braintta/events.hpp"
#include "braintta/funits.hpp"
#include "braintta/isa.hpp"
#include "braintta/kernels.hpp"
#include "braintta/layer.hpp"
#include "braintta/layout.hpp"
#include "braintta/machine.hpp"
#include "braintta/memory.hpp"
#include "braintta/oracle.hpp"
#include "braintta/validate.hpp"
#include "braintta/vec.hpp"
#include "braintta/verify.hpp"
