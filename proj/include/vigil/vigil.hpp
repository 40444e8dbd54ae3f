#pragma once

#include "vigil/annotation.hpp"
#include "vigil/background.hpp"
#include "vigil/calibration.hpp"
#include "vigil/client.hpp"
#include "vigil/dataset.hpp"
#include "vigil/errors.hpp"
#include "vigil/evaluation.hpp"
#include "vigil/image.hpp"
#include "vigil/image_io.hpp"
#include "vigil/matching.hpp"
#include "vigil/models.hpp"
#include "vigil/pipeline.hpp"
#include "vigil/rle.hpp"
#include "vigil/taxonomy.hpp"
#include "vigil/transport.hpp"
#include "vigil/wire.hpp"
