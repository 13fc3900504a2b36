// Copyright 2026 The jurybt Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "jurybt/parallel.h"

#include <algorithm>

namespace jurybt {
namespace {

void RunChunk(const std::function<void(std::size_t)>& fn, std::size_t n,
              int chunk, int chunks) {
  const std::size_t begin = n * chunk / chunks;
  const std::size_t end = n * (chunk + 1) / chunks;
  for (std::size_t i = begin; i < end; ++i) fn(i);
}

}  // namespace

WorkerPool::WorkerPool(int workers) {
  for (int i = 1; i < workers; ++i) {
    threads_.emplace_back([this, i] { WorkerLoop(i); });
  }
}

WorkerPool::~WorkerPool() {
  {
    std::lock_guard<std::mutex> lock(mu_);
    stop_ = true;
  }
  work_cv_.notify_all();
  for (std::thread& t : threads_) t.join();
}

void WorkerPool::ParallelFor(std::size_t n,
                             const std::function<void(std::size_t)>& fn) {
  if (threads_.empty() || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  {
    std::lock_guard<std::mutex> lock(mu_);
    task_ = &fn;
    task_size_ = n;
    pending_ = static_cast<int>(threads_.size());
    ++generation_;
  }
  work_cv_.notify_all();
  RunChunk(fn, n, 0, size());
  std::unique_lock<std::mutex> lock(mu_);
  done_cv_.wait(lock, [this] { return pending_ == 0; });
  task_ = nullptr;
}

void WorkerPool::WorkerLoop(int index) {
  std::size_t seen = 0;
  for (;;) {
    const std::function<void(std::size_t)>* task;
    std::size_t n;
    {
      std::unique_lock<std::mutex> lock(mu_);
      work_cv_.wait(lock, [&] { return stop_ || generation_ != seen; });
      if (stop_) return;
      seen = generation_;
      task = task_;
      n = task_size_;
    }
    RunChunk(*task, n, index, size());
    {
      std::lock_guard<std::mutex> lock(mu_);
      --pending_;
    }
    done_cv_.notify_one();
  }
}

int DefaultWorkerCount() {
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace jurybt
