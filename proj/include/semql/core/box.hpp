#pragma once

#include <memory>
#include <utility>

namespace semql {

/// Heap-allocated value with deep copy and value equality. Lets recursive
/// AST types hold optional sub-objects while staying regular.
template <typename T>
class Box {
  public:
    Box() = default;
    Box(T value) : ptr_(std::make_unique<T>(std::move(value))) {}  // NOLINT(implicit)
    Box(Box const& other) : ptr_(other.ptr_ ? std::make_unique<T>(*other.ptr_) : nullptr) {}
    Box(Box&&) noexcept = default;
    Box& operator=(Box const& other) {
        if (this != &other) ptr_ = other.ptr_ ? std::make_unique<T>(*other.ptr_) : nullptr;
        return *this;
    }
    Box& operator=(Box&&) noexcept = default;
    ~Box() = default;

    [[nodiscard]] explicit operator bool() const { return ptr_ != nullptr; }
    [[nodiscard]] T& operator*() { return *ptr_; }
    [[nodiscard]] T const& operator*() const { return *ptr_; }
    [[nodiscard]] T* operator->() { return ptr_.get(); }
    [[nodiscard]] T const* operator->() const { return ptr_.get(); }

    friend bool operator==(Box const& a, Box const& b) {
        if (!a.ptr_ || !b.ptr_) return !a.ptr_ && !b.ptr_;
        return *a.ptr_ == *b.ptr_;
    }

  private:
    std::unique_ptr<T> ptr_;
};

}  // namespace semql
