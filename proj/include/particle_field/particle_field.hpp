// Copyright Contributors to the particle_field project
// SPDX-License-Identifier: Apache-2.0
//
/// @file particle_field.hpp
/// Umbrella header.

#pragma once

#include "common.hpp"
#include "field_network.hpp"
#include "image.hpp"
#include "neighbor_index.hpp"
#include "particle_encoding.hpp"
#include "physics.hpp"
#include "pipeline.hpp"
#include "renderer.hpp"
#include "scene_io.hpp"
#include "trainer.hpp"
