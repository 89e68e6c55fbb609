#pragma once

#include "fusepipe/error.hpp"
#include "fusepipe/rng.hpp"
#include "fusepipe/hash.hpp"
#include "fusepipe/imgprep.hpp"
#include "fusepipe/png_io.hpp"
#include "fusepipe/featureio.hpp"
#include "fusepipe/transforms.hpp"
#include "fusepipe/classifiers/classifier.hpp"
#include "fusepipe/grids.hpp"
#include "fusepipe/hpo.hpp"
#include "fusepipe/ensemble.hpp"
#include "fusepipe/evalreport.hpp"
#include "fusepipe/synthetic.hpp"
#include "fusepipe/pipeline.hpp"
