#pragma once

// Umbrella header.
#include "mimlnd/datagen.hpp"
#include "mimlnd/dataset.hpp"
#include "mimlnd/detector.hpp"
#include "mimlnd/error.hpp"
#include "mimlnd/experiment.hpp"
#include "mimlnd/idx.hpp"
#include "mimlnd/io.hpp"
#include "mimlnd/kernel.hpp"
#include "mimlnd/lbfgs.hpp"
#include "mimlnd/model.hpp"
#include "mimlnd/ocsvm.hpp"
#include "mimlnd/pca.hpp"
#include "mimlnd/tuning.hpp"
