#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string_view>
#include <type_traits>
#include <vector>

#include "wavesens/grid.hpp"

namespace wavesens {

enum class Precision { Single, Double };

std::string_view to_string(Precision p);
Precision parse_precision(std::string_view text);

template <class T>
constexpr Precision precision_of() {
    static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
    return std::is_same_v<T, float> ? Precision::Single : Precision::Double;
}

/**
 * Process-wide count of live grid-sized solution buffers (Field objects
 * that own storage). Material arrays and compact per-sensor storage are
 * not counted. Used to verify the memory contract of the gradient engines.
 */
class BufferCounter {
public:
    static std::size_t live() { return live_.load(); }
    static std::size_t peak() { return peak_.load(); }
    /// Restart peak tracking from the current live count.
    static void reset_peak() { peak_.store(live_.load()); }

    static void acquire() {
        const auto now = live_.fetch_add(1) + 1;
        auto seen = peak_.load();
        while (now > seen && !peak_.compare_exchange_weak(seen, now)) {
        }
    }
    static void release() { live_.fetch_sub(1); }

private:
    static inline std::atomic<std::size_t> live_{0};
    static inline std::atomic<std::size_t> peak_{0};
};

/// Peak number of buffers allocated on top of those alive at construction.
class PeakBufferScope {
public:
    PeakBufferScope() : baseline_(BufferCounter::live()) { BufferCounter::reset_peak(); }
    std::size_t extra_peak() const { return BufferCounter::peak() - baseline_; }

private:
    std::size_t baseline_;
};

/// One scalar value per grid node at one time level.
template <class T>
class Field {
public:
    static constexpr Precision precision = precision_of<T>();

    Field() = default;
    explicit Field(const Grid& grid, T value = T(0)) : grid_(grid), values_(grid.size(), value) {
        if (!values_.empty()) BufferCounter::acquire();
    }
    Field(const Grid& grid, std::span<const double> values) : grid_(grid), values_(grid.size()) {
        if (values.size() != grid.size()) throw std::invalid_argument("field value count does not match grid");
        std::transform(values.begin(), values.end(), values_.begin(), [](double v) { return static_cast<T>(v); });
        if (!values_.empty()) BufferCounter::acquire();
    }
    Field(const Field& other) : grid_(other.grid_), values_(other.values_) {
        if (!values_.empty()) BufferCounter::acquire();
    }
    Field(Field&& other) noexcept : grid_(other.grid_), values_(std::move(other.values_)) {
        other.values_.clear();
    }
    Field& operator=(const Field& other) {
        if (this != &other) {
            if (values_.empty() && !other.values_.empty()) BufferCounter::acquire();
            if (!values_.empty() && other.values_.empty()) BufferCounter::release();
            grid_ = other.grid_;
            values_ = other.values_;
        }
        return *this;
    }
    Field& operator=(Field&& other) noexcept {
        if (this != &other) {
            if (!values_.empty()) BufferCounter::release();
            grid_ = other.grid_;
            values_ = std::move(other.values_);
            other.values_.clear();
        }
        return *this;
    }
    ~Field() {
        if (!values_.empty()) BufferCounter::release();
    }

    const Grid& grid() const { return grid_; }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    std::span<T> values() { return values_; }
    std::span<const T> values() const { return values_; }
    T* data() { return values_.data(); }
    const T* data() const { return values_.data(); }
    T& operator[](std::size_t i) { return values_[i]; }
    const T& operator[](std::size_t i) const { return values_[i]; }

    void fill(T value) { std::fill(values_.begin(), values_.end(), value); }

    /// this <- this + k * other, nodewise.
    Field& add_scaled(const Field& other, T k) {
        if (other.size() != size()) throw std::invalid_argument("field size mismatch");
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += k * other.values_[i];
        return *this;
    }

    bool all_finite() const {
        return std::all_of(values_.begin(), values_.end(), [](T v) { return std::isfinite(v); });
    }

    T max_abs() const {
        T m = 0;
        for (T v : values_) m = std::max(m, std::abs(v));
        return m;
    }

    std::vector<double> to_double() const { return std::vector<double>(values_.begin(), values_.end()); }

    friend void swap(Field& a, Field& b) noexcept {
        std::swap(a.grid_, b.grid_);
        a.values_.swap(b.values_);
    }

private:
    Grid grid_;
    std::vector<T> values_;
};

}  // namespace wavesens
