/*
 * facekit - a geometry and data-construction toolkit for 3D face capture.
 *
 * File: include/facekit/pipeline.hpp
 *
 * Copyright 2026 The facekit authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include "facekit/config.hpp"

#include <string>
#include <vector>

namespace facekit {

/**
 * Template annotations that cannot be derived from geometry alone: fuse
 * regions, the contour-marching band and the eye centers. Stored as
 * annotations.json next to the model container.
 */
struct TemplateAnnotations
{
    std::vector<int> regions;
    std::vector<int> contour_band;
    int left_eye = -1;
    int right_eye = -1;

    void save(const std::string& path) const;
    static TemplateAnnotations load(const std::string& path);
};

struct PipelineResult
{
    int exit_code = 0; // 0 success, 1 partial failure
    std::string manifest_path;
    int samples_ok = 0;
    int samples_failed = 0;
};

/**
 * Runs register -> disentangle -> pose & shape augmentation -> view
 * synthesis -> metrics on every sample directory under input_dir, writing
 * artifacts and a manifest with content hashes under output_dir. A failing
 * sample is logged and skipped; the exit code reports partial failure.
 */
PipelineResult run_pipeline(const RunConfig& config);

} // namespace facekit
