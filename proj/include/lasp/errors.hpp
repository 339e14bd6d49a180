#pragma once

#include <stdexcept>
#include <string>

namespace lasp {

// Every failure raised by the library derives from Error so callers can catch
// one type at the CLI boundary and still dispatch on the concrete kind in tests.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define LASP_DEFINE_ERROR(Name)                                   \
    class Name : public Error {                                   \
    public:                                                       \
        explicit Name(const std::string& what) : Error(what) {}   \
    }

// numerics
LASP_DEFINE_ERROR(EmptyMatrix);
LASP_DEFINE_ERROR(NonFinite);
LASP_DEFINE_ERROR(UnsupportedBits);
LASP_DEFINE_ERROR(ShapeMismatch);
LASP_DEFINE_ERROR(SchemeMismatch);

// attention
LASP_DEFINE_ERROR(AllMaskedRow);
LASP_DEFINE_ERROR(EmptyCandidateSet);
LASP_DEFINE_ERROR(ZeroMass);

// encoder_graph
LASP_DEFINE_ERROR(InvalidConfig);
LASP_DEFINE_ERROR(CyclicGraph);
LASP_DEFINE_ERROR(NodeExceedsBudget);

// pipeline_sim
LASP_DEFINE_ERROR(EmptyBatch);
LASP_DEFINE_ERROR(EmptyTrace);
LASP_DEFINE_ERROR(WorkloadMismatch);

// workload_cli
LASP_DEFINE_ERROR(ParseError);
LASP_DEFINE_ERROR(ValidationError);
LASP_DEFINE_ERROR(InfeasibleStats);
LASP_DEFINE_ERROR(IoError);

#undef LASP_DEFINE_ERROR

}  // namespace lasp
