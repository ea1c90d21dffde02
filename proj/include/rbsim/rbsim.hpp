#pragma once

#include "rbsim/commands.hpp"
#include "rbsim/config.hpp"
#include "rbsim/controller.hpp"
#include "rbsim/design.hpp"
#include "rbsim/errors.hpp"
#include "rbsim/pack.hpp"
#include "rbsim/psc.hpp"
#include "rbsim/simulator.hpp"
#include "rbsim/steady_state.hpp"
#include "rbsim/types.hpp"
