#pragma once

#include "devalloc/bitmask_allocator.hpp"
#include "devalloc/block_table.hpp"
#include "devalloc/core.hpp"
#include "devalloc/hybrid_array_list.hpp"
#include "devalloc/reference_allocator.hpp"
#include "devalloc/segregated_fit.hpp"
#include "devalloc/sequential_fit.hpp"
