#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "priorweaver/error.hpp"
#include "priorweaver/model_spec.hpp"

namespace priorweaver {

struct EntityId {
    std::uint64_t value = 0;
    auto operator<=>(const EntityId&) const = default;
};

std::string to_string(EntityId id);

/// One dataset row. `values` is indexed like Dataset::variables(); an unset
/// slot is a missing value.
struct Entity {
    EntityId id;
    std::vector<std::optional<double>> values;

    bool has(std::size_t var) const noexcept { return values[var].has_value(); }
    std::size_t defined_count() const noexcept;
    bool complete() const noexcept { return defined_count() == values.size(); }
    bool empty() const noexcept { return defined_count() == 0; }
};

enum class EntityMode { complete, incomplete };

std::string_view to_string(EntityMode mode) noexcept;
EntityMode mode_from_string(std::string_view text);

/// Cross-filter: brushed intervals per variable plus the complete/incomplete mode.
struct Selection {
    std::map<std::string, Interval> brushes;
    EntityMode mode = EntityMode::complete;
};

struct HistogramBin {
    Interval bin;
    std::size_t count = 0;
};

/// Entities brushed on one set of axes.
struct ConnectGroup {
    std::vector<std::string> variables;
    std::vector<EntityId> entities;
};

/// Planned merges, bound to the dataset revision it was computed against.
struct ConnectPlan {
    std::uint64_t revision = 0;
    std::vector<std::vector<EntityId>> merges;  // one source entity per group, group order
};

/// set_binning refused because values would fall outside the new range.
class OrphanedValuesError : public Error {
public:
    OrphanedValuesError(const std::string& message, std::vector<EntityId> entities)
        : Error("would_orphan_values", message), entities_(std::move(entities)) {}
    const std::vector<EntityId>& entities() const noexcept { return entities_; }

private:
    std::vector<EntityId> entities_;
};

/// The analyst-constructed dataset. Entities are the only state; every view
/// (histograms, marginals, complete rows, selections) is derived from them on
/// demand. All mutations are strongly exception-safe and bump revision().
///
/// Not internally synchronized: callers serialize writers.
class Dataset {
public:
    Dataset(std::vector<VariableSpec> variables, std::uint64_t seed);

    static Dataset for_model(const ModelSpec& model, std::uint64_t seed) {
        return Dataset(default_variables(model), seed);
    }

    /// Rebuilds a dataset from persisted parts; throws Error("schema_error")
    /// if the entities violate any invariant.
    static Dataset restore(std::vector<VariableSpec> variables, std::vector<Entity> entities, std::uint64_t seed,
                           std::uint64_t stream_counter);

    const std::vector<VariableSpec>& variables() const noexcept { return variables_; }
    const VariableSpec& variable(std::string_view name) const { return variables_[variable_index(name)]; }
    std::size_t variable_index(std::string_view name) const;

    const std::vector<Entity>& entities() const noexcept { return entities_; }
    const Entity* find(EntityId id) const noexcept;

    std::uint64_t seed() const noexcept { return seed_; }
    /// Number of random substreams consumed by GENERATE so far.
    std::uint64_t stream_counter() const noexcept { return stream_counter_; }
    /// Incremented on every successful mutation.
    std::uint64_t revision() const noexcept { return revision_; }

    /// Center of bin `bin_index`: lo + (i + 0.5) * width.
    double bin_center(std::string_view var, int bin_index) const;

    EntityId add_value(std::string_view var, double value);
    EntityId add_value_at_bin(std::string_view var, int bin_index) { return add_value(var, bin_center(var, bin_index)); }

    void remove_value(EntityId id, std::string_view var);

    /// Changes bins and range. Values outside `range` make the call fail with
    /// OrphanedValuesError unless `force`, in which case they are dropped.
    /// Returns the number of dropped values.
    std::size_t set_binning(std::string_view var, int bin_count, Interval range, bool force = false);

    std::vector<HistogramBin> histogram(std::string_view var) const;

    /// Defined values of `var` in entity order.
    std::vector<double> marginal(std::string_view var) const;

    /// Appends `count` entities, each constrained variable drawn uniformly in
    /// its interval, unconstrained variables left missing.
    std::vector<EntityId> generate_entities(const std::map<std::string, Interval>& constraints, std::size_t count);

    ConnectPlan preview_connections(std::span<const ConnectGroup> groups) const;

    /// Applies a fresh plan; each merge becomes one new entity appended at the end.
    std::vector<EntityId> connect(const ConnectPlan& plan);

    std::vector<EntityId> query(const Selection& selection) const;

    /// One row per complete entity, columns = model.variables(), entity order.
    Eigen::MatrixXd complete_rows(const ModelSpec& model) const;

    std::size_t complete_count() const noexcept;

    /// Throws std::logic_error if a stored value is out of range, an entity is
    /// empty, or ids collide.
    void verify() const;

private:
    std::size_t entity_index(EntityId id) const;
    EntityId allocate_id() noexcept { return EntityId{next_id_++}; }
    void committed();

    std::vector<VariableSpec> variables_;
    std::vector<Entity> entities_;
    std::uint64_t seed_ = 0;
    std::uint64_t stream_counter_ = 0;
    std::uint64_t revision_ = 0;
    std::uint64_t next_id_ = 1;
};

}  // namespace priorweaver
