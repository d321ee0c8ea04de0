// Copyright the sponet authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

namespace sponet
{

// Keeps freed tensor buffers in the heap instead of returning them to the
// OS after every training step. Large short-lived allocations otherwise pay
// page faults on each use. No-op outside glibc.
void configure_allocator();

}  // namespace sponet
