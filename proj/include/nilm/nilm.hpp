#pragma once

#include "nilm/errors.hpp"
#include "nilm/ingest.hpp"
#include "nilm/preprocess.hpp"
#include "nilm/knowledge.hpp"
#include "nilm/prompt.hpp"
#include "nilm/client.hpp"
#include "nilm/normalizer.hpp"
#include "nilm/driver.hpp"
#include "nilm/metrics.hpp"
#include "nilm/explain.hpp"
#include "nilm/harness.hpp"
