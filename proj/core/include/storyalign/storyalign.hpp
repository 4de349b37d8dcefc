#pragma once

#include "storyalign/combinations.hpp"
#include "storyalign/curation.hpp"
#include "storyalign/dataset.hpp"
#include "storyalign/diff.hpp"
#include "storyalign/embedding.hpp"
#include "storyalign/error.hpp"
#include "storyalign/gradcheck.hpp"
#include "storyalign/illustrate.hpp"
#include "storyalign/model.hpp"
#include "storyalign/objectives.hpp"
#include "storyalign/retrieval_eval.hpp"
#include "storyalign/synthetic.hpp"
#include "storyalign/text.hpp"
#include "storyalign/trainer.hpp"
#include "storyalign/validate.hpp"
#include "storyalign/version.hpp"
