#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace trait {

/// Worker-thread budget: TRAIT_THREADS when set to a positive integer,
/// otherwise the hardware concurrency (at least 1).
inline unsigned worker_threads() {
	if (const char* env = std::getenv("TRAIT_THREADS")) {
		try {
			long v = std::stol(env);
			if (v > 0) return static_cast<unsigned>(v);
		} catch (...) {
		}
	}
	return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(begin, end) over contiguous chunks of [0, n). The first exception
/// thrown by any chunk is rethrown on the caller's thread.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn, unsigned threads = worker_threads()) {
	if (n == 0) return;
	threads = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), n));
	if (threads == 1) {
		fn(std::size_t{0}, n);
		return;
	}
	std::vector<std::thread> pool;
	std::vector<std::exception_ptr> errors(threads);
	std::size_t chunk = (n + threads - 1) / threads;
	for (unsigned t = 0; t < threads; ++t) {
		std::size_t begin = t * chunk;
		std::size_t end = std::min(n, begin + chunk);
		if (begin >= end) break;
		pool.emplace_back([&, t, begin, end] {
			try {
				fn(begin, end);
			} catch (...) {
				errors[t] = std::current_exception();
			}
		});
	}
	for (auto& th : pool) th.join();
	for (auto& e : errors) {
		if (e) std::rethrow_exception(e);
	}
}

} // namespace trait
