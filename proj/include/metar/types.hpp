#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace metar {

using EntityId = std::int32_t;
using RelationId = std::int32_t;

// Row-major so that an entity's embedding is a contiguous row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct Triple {
    EntityId head = 0;
    RelationId relation = 0;
    EntityId tail = 0;

    friend auto operator<=>(const Triple&, const Triple&) = default;
};

struct EntityPair {
    EntityId head = 0;
    EntityId tail = 0;

    friend auto operator<=>(const EntityPair&, const EntityPair&) = default;
};

enum class Split { Train, Dev, Test };

const char* to_string(Split split);
Split parse_split(const std::string& text);

// All library failures surface as metar::Error with a one-line message.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace metar
