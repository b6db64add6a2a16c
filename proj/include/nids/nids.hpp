#pragma once

#include "nids/balance.hpp"
#include "nids/cnn.hpp"
#include "nids/dataset.hpp"
#include "nids/error.hpp"
#include "nids/evaluate.hpp"
#include "nids/fcbf.hpp"
#include "nids/ingest.hpp"
#include "nids/io.hpp"
#include "nids/kmeans.hpp"
#include "nids/matrix.hpp"
#include "nids/model.hpp"
#include "nids/normalize.hpp"
#include "nids/pca.hpp"
#include "nids/pipeline.hpp"
#include "nids/random.hpp"
#include "nids/random_forest.hpp"
#include "nids/smote.hpp"
#include "nids/synthetic.hpp"
#include "nids/tpe.hpp"
