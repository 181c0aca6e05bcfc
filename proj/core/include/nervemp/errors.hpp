#pragma once

#include <stdexcept>
#include <string>

namespace nervemp {

// Every failure raised by the library derives from Error. The CLI maps the
// `category()` of an error onto its exit code.
class Error : public std::runtime_error {
 public:
  enum class Category { invalid_input, numerical, internal };

  explicit Error(const std::string& what, Category category = Category::internal)
      : std::runtime_error(what), category_(category) {}

  Category category() const noexcept { return category_; }

 private:
  Category category_;
};

#define NERVEMP_DEFINE_ERROR(Name, Cat)                                     \
  class Name : public Error {                                               \
   public:                                                                  \
    explicit Name(const std::string& what) : Error(#Name ": " + what, Cat) {} \
  };

NERVEMP_DEFINE_ERROR(InvalidInstance, Category::invalid_input)
NERVEMP_DEFINE_ERROR(ConfigError, Category::invalid_input)
NERVEMP_DEFINE_ERROR(DimensionMismatch, Category::invalid_input)
NERVEMP_DEFINE_ERROR(MissingVariable, Category::invalid_input)
NERVEMP_DEFINE_ERROR(UnknownVariable, Category::invalid_input)
NERVEMP_DEFINE_ERROR(DisconnectedNerve, Category::invalid_input)
NERVEMP_DEFINE_ERROR(InfeasibleStats, Category::invalid_input)
NERVEMP_DEFINE_ERROR(UnboundedBelow, Category::numerical)
NERVEMP_DEFINE_ERROR(NonUniqueArgmin, Category::numerical)
NERVEMP_DEFINE_ERROR(IllDefinedTask, Category::numerical)
NERVEMP_DEFINE_ERROR(SingularFit, Category::numerical)
NERVEMP_DEFINE_ERROR(InnerOptimizationFailed, Category::numerical)

#undef NERVEMP_DEFINE_ERROR

}  // namespace nervemp
