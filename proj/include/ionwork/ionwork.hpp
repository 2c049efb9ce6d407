#pragma once

#include "ionwork/errors.hpp"
#include "ionwork/units.hpp"
#include "ionwork/fock.hpp"
#include "ionwork/models.hpp"
#include "ionwork/rng.hpp"
#include "ionwork/parallel.hpp"
#include "ionwork/evolve.hpp"
#include "ionwork/tpm.hpp"
#include "ionwork/readout.hpp"
#include "ionwork/stats.hpp"
#include "ionwork/scenario.hpp"
#include "ionwork/version.hpp"
