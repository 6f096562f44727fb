#pragma once

#include <cassert>
#include <utility>
#include <variant>

namespace edtrace {

// Minimal value-or-error holder; libstdc++ 11 has no std::expected.
template <typename E>
struct Unexpected {
    E error;
};

template <typename E>
Unexpected<E> unexpected(E e) { return Unexpected<E>{std::move(e)}; }

template <typename T, typename E>
class Expected {
public:
    Expected(T value) : data_(std::in_place_index<0>, std::move(value)) {}
    Expected(Unexpected<E> err) : data_(std::in_place_index<1>, std::move(err.error)) {}

    bool has_value() const { return data_.index() == 0; }
    explicit operator bool() const { return has_value(); }

    T& value() & { assert(has_value()); return std::get<0>(data_); }
    const T& value() const& { assert(has_value()); return std::get<0>(data_); }
    T&& value() && { assert(has_value()); return std::get<0>(std::move(data_)); }

    const E& error() const { assert(!has_value()); return std::get<1>(data_); }

    T* operator->() { return &value(); }
    const T* operator->() const { return &value(); }
    T& operator*() & { return value(); }
    const T& operator*() const& { return value(); }

private:
    std::variant<T, E> data_;
};

} // namespace edtrace
