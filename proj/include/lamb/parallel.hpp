#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace lamb {

/// Thread count used when the caller passes 0: LAMB_THREADS if set,
/// otherwise the hardware concurrency.
inline unsigned default_threads() {
	if (const char* env = std::getenv("LAMB_THREADS")) {
		try {
			const int v = std::stoi(env);
			if (v > 0)
				return static_cast<unsigned>(v);
		} catch (...) {
		}
	}
	return std::max(1u, std::thread::hardware_concurrency());
}

/// Calls fn(k) for every k in [0, count). Indices are split into contiguous
/// chunks, one per thread; fn must only write state owned by index k, so the
/// result does not depend on the thread count. The first exception thrown by
/// any worker is rethrown on the calling thread.
template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
	if (threads == 0)
		threads = default_threads();
	const std::size_t workers = std::min<std::size_t>(threads, count);
	if (workers <= 1) {
		for (std::size_t k = 0; k < count; ++k)
			fn(k);
		return;
	}

	std::exception_ptr error;
	std::mutex error_mutex;
	{
		std::vector<std::jthread> pool;
		pool.reserve(workers);
		for (std::size_t w = 0; w < workers; ++w) {
			const std::size_t begin = count * w / workers;
			const std::size_t end = count * (w + 1) / workers;
			pool.emplace_back([&, begin, end] {
				try {
					for (std::size_t k = begin; k < end; ++k)
						fn(k);
				} catch (...) {
					std::lock_guard lock(error_mutex);
					if (!error)
						error = std::current_exception();
				}
			});
		}
	}
	if (error)
		std::rethrow_exception(error);
}

} // namespace lamb
