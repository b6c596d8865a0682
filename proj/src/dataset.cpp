#include "priorweaver/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "priorweaver/rng.hpp"

namespace priorweaver {

std::string to_string(EntityId id) { return std::to_string(id.value); }

std::size_t Entity::defined_count() const noexcept {
    return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [](const auto& v) { return v.has_value(); }));
}

std::string_view to_string(EntityMode mode) noexcept { return mode == EntityMode::complete ? "complete" : "incomplete"; }

EntityMode mode_from_string(std::string_view text) {
    if (text == "complete") return EntityMode::complete;
    if (text == "incomplete") return EntityMode::incomplete;
    throw Error("invalid_argument", "mode must be 'complete' or 'incomplete'");
}

namespace {

void check_in_range(const VariableSpec& spec, double value) {
    if (!std::isfinite(value) || !spec.range.contains(value))
        throw Error("out_of_range", "value " + std::to_string(value) + " outside range [" + std::to_string(spec.range.lo) +
                                        ", " + std::to_string(spec.range.hi) + "] of '" + spec.name + "'");
}

std::string join_ids(const std::vector<EntityId>& ids) {
    std::string out;
    for (const auto& id : ids) out += (out.empty() ? "" : ", ") + to_string(id);
    return out;
}

}  // namespace

Dataset::Dataset(std::vector<VariableSpec> variables, std::uint64_t seed) : variables_(std::move(variables)), seed_(seed) {
    if (variables_.empty()) throw Error("invalid_argument", "dataset needs at least one variable");
    std::set<std::string> names;
    for (const auto& v : variables_) {
        v.validate();
        if (!names.insert(v.name).second) throw Error("invalid_argument", "duplicate variable '" + v.name + "'");
    }
}

Dataset Dataset::restore(std::vector<VariableSpec> variables, std::vector<Entity> entities, std::uint64_t seed,
                         std::uint64_t stream_counter) {
    Dataset ds(std::move(variables), seed);
    std::set<EntityId> ids;
    for (const auto& e : entities) {
        if (e.values.size() != ds.variables_.size()) throw Error("schema_error", "entity arity mismatch");
        if (e.empty()) throw Error("schema_error", "entity " + to_string(e.id) + " has no values");
        if (!ids.insert(e.id).second) throw Error("schema_error", "duplicate entity id " + to_string(e.id));
        for (std::size_t v = 0; v < e.values.size(); ++v) {
            if (!e.values[v]) continue;
            try {
                check_in_range(ds.variables_[v], *e.values[v]);
            } catch (const Error& err) {
                throw Error("schema_error", "entity " + to_string(e.id) + ": " + err.message());
            }
        }
        ds.next_id_ = std::max(ds.next_id_, e.id.value + 1);
    }
    ds.entities_ = std::move(entities);
    ds.stream_counter_ = stream_counter;
    return ds;
}

std::size_t Dataset::variable_index(std::string_view name) const {
    for (std::size_t i = 0; i < variables_.size(); ++i)
        if (variables_[i].name == name) return i;
    throw Error("unknown_variable", "unknown variable '" + std::string(name) + "'");
}

const Entity* Dataset::find(EntityId id) const noexcept {
    auto it = std::find_if(entities_.begin(), entities_.end(), [&](const Entity& e) { return e.id == id; });
    return it == entities_.end() ? nullptr : &*it;
}

std::size_t Dataset::entity_index(EntityId id) const {
    for (std::size_t i = 0; i < entities_.size(); ++i)
        if (entities_[i].id == id) return i;
    throw Error("unknown_entity", "unknown entity " + to_string(id));
}

void Dataset::committed() {
    ++revision_;
    verify();
}

double Dataset::bin_center(std::string_view var, int bin_index) const {
    const auto& spec = variable(var);
    if (bin_index < 0 || bin_index >= spec.bin_count)
        throw Error("out_of_range", "bin index " + std::to_string(bin_index) + " outside [0, " +
                                        std::to_string(spec.bin_count) + ") for '" + spec.name + "'");
    const double width = spec.range.width() / spec.bin_count;
    return spec.range.lo + (bin_index + 0.5) * width;
}

EntityId Dataset::add_value(std::string_view var, double value) {
    const std::size_t v = variable_index(var);
    check_in_range(variables_[v], value);
    Entity e{allocate_id(), std::vector<std::optional<double>>(variables_.size())};
    e.values[v] = value;
    entities_.push_back(std::move(e));
    committed();
    return entities_.back().id;
}

void Dataset::remove_value(EntityId id, std::string_view var) {
    const std::size_t i = entity_index(id);
    const std::size_t v = variable_index(var);
    if (!entities_[i].has(v))
        throw Error("value_not_defined", "entity " + to_string(id) + " has no value for '" + std::string(var) + "'");
    entities_[i].values[v].reset();
    if (entities_[i].empty()) entities_.erase(entities_.begin() + static_cast<std::ptrdiff_t>(i));
    committed();
}

std::size_t Dataset::set_binning(std::string_view var, int bin_count, Interval range, bool force) {
    const std::size_t v = variable_index(var);
    VariableSpec updated = variables_[v];
    updated.bin_count = bin_count;
    updated.range = range;
    updated.validate();

    std::vector<EntityId> offending;
    for (const auto& e : entities_)
        if (e.has(v) && !range.contains(*e.values[v])) offending.push_back(e.id);

    if (!offending.empty() && !force)
        throw OrphanedValuesError("new range for '" + updated.name + "' would orphan values of entities " +
                                      join_ids(offending),
                                  offending);

    for (auto& e : entities_)
        if (e.has(v) && !range.contains(*e.values[v])) e.values[v].reset();
    std::erase_if(entities_, [](const Entity& e) { return e.empty(); });
    variables_[v] = std::move(updated);
    committed();
    return offending.size();
}

std::vector<HistogramBin> Dataset::histogram(std::string_view var) const {
    const std::size_t v = variable_index(var);
    const auto& spec = variables_[v];
    const double width = spec.range.width() / spec.bin_count;
    std::vector<HistogramBin> bins(static_cast<std::size_t>(spec.bin_count));
    for (int i = 0; i < spec.bin_count; ++i) {
        bins[static_cast<std::size_t>(i)].bin = {spec.range.lo + i * width,
                                                 i + 1 == spec.bin_count ? spec.range.hi : spec.range.lo + (i + 1) * width};
    }
    for (const auto& e : entities_) {
        if (!e.has(v)) continue;
        auto i = static_cast<long>(std::floor((*e.values[v] - spec.range.lo) / width));
        i = std::clamp(i, 0L, static_cast<long>(spec.bin_count) - 1);
        // Floating-point edge: keep the value inside the half-open interval it belongs to.
        const double x = *e.values[v];
        if (i > 0 && x < bins[static_cast<std::size_t>(i)].bin.lo) --i;
        if (i + 1 < spec.bin_count && x >= bins[static_cast<std::size_t>(i)].bin.hi) ++i;
        ++bins[static_cast<std::size_t>(i)].count;
    }
    return bins;
}

std::vector<double> Dataset::marginal(std::string_view var) const {
    const std::size_t v = variable_index(var);
    std::vector<double> out;
    for (const auto& e : entities_)
        if (e.has(v)) out.push_back(*e.values[v]);
    return out;
}

std::vector<EntityId> Dataset::generate_entities(const std::map<std::string, Interval>& constraints, std::size_t count) {
    if (constraints.empty()) throw Error("invalid_argument", "GENERATE needs at least one constrained variable");
    std::vector<std::pair<std::size_t, Interval>> resolved;
    for (const auto& [name, interval] : constraints) {
        const std::size_t v = variable_index(name);
        if (!(interval.lo <= interval.hi) || !interval.within(variables_[v].range))
            throw Error("out_of_range", "constraint on '" + name + "' is not a sub-interval of its range");
        resolved.emplace_back(v, interval);
    }
    // Draw in variable order so the result does not depend on map ordering.
    std::sort(resolved.begin(), resolved.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    if (count == 0) return {};

    Rng rng = Rng::substream(seed_, {stream::generate, stream_counter_});
    std::vector<EntityId> ids;
    ids.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
        Entity e{allocate_id(), std::vector<std::optional<double>>(variables_.size())};
        for (const auto& [v, interval] : resolved) e.values[v] = rng.uniform(interval.lo, interval.hi);
        ids.push_back(e.id);
        entities_.push_back(std::move(e));
    }
    ++stream_counter_;
    committed();
    return ids;
}

ConnectPlan Dataset::preview_connections(std::span<const ConnectGroup> groups) const {
    if (groups.size() < 2) throw Error("invalid_argument", "CONNECT needs at least two groups");

    std::vector<std::vector<bool>> group_vars(groups.size(), std::vector<bool>(variables_.size(), false));
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (groups[g].variables.empty()) throw Error("invalid_argument", "CONNECT group without variables");
        for (const auto& name : groups[g].variables) group_vars[g][variable_index(name)] = true;
        for (const auto& id : groups[g].entities) entity_index(id);
    }

    std::map<EntityId, int> selected_in;
    for (const auto& group : groups) {
        std::set<EntityId> unique(group.entities.begin(), group.entities.end());
        for (const auto& id : unique) ++selected_in[id];
    }

    // Eligible: selected in exactly this group, incomplete, defines one of the
    // group's variables and none of any other group's variables.
    std::vector<std::vector<const Entity*>> eligible(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g) {
        std::set<EntityId> seen;
        for (const auto& id : groups[g].entities) {
            if (!seen.insert(id).second || selected_in[id] != 1) continue;
            const Entity& e = entities_[entity_index(id)];
            if (e.complete()) continue;
            bool own = false, foreign = false;
            for (std::size_t v = 0; v < variables_.size(); ++v) {
                if (!e.has(v)) continue;
                if (group_vars[g][v]) own = true;
                for (std::size_t h = 0; h < groups.size(); ++h)
                    if (h != g && group_vars[h][v]) foreign = true;
            }
            if (own && !foreign) eligible[g].push_back(&e);
        }
    }

    ConnectPlan plan;
    plan.revision = revision_;
    std::size_t merge_count = eligible.front().size();
    for (const auto& list : eligible) merge_count = std::min(merge_count, list.size());
    if (merge_count == 0) return plan;

    Rng rng = Rng::substream(seed_, {stream::connect, stream_counter_});
    for (auto& list : eligible) {
        for (std::size_t i = list.size(); i > 1; --i) std::swap(list[i - 1], list[rng.below(i)]);
    }

    std::vector<std::vector<bool>> used(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g) used[g].assign(eligible[g].size(), false);

    for (std::size_t m = 0; m < merge_count; ++m) {
        std::vector<bool> defined(variables_.size(), false);
        std::vector<std::pair<std::size_t, std::size_t>> picks;
        for (std::size_t g = 0; g < groups.size(); ++g) {
            for (std::size_t i = 0; i < eligible[g].size(); ++i) {
                if (used[g][i]) continue;
                const Entity& e = *eligible[g][i];
                bool overlaps = false;
                for (std::size_t v = 0; v < variables_.size(); ++v) overlaps = overlaps || (e.has(v) && defined[v]);
                if (overlaps) continue;
                for (std::size_t v = 0; v < variables_.size(); ++v) defined[v] = defined[v] || e.has(v);
                picks.emplace_back(g, i);
                break;
            }
        }
        if (picks.size() != groups.size()) break;
        std::vector<EntityId> merge;
        for (const auto& [g, i] : picks) {
            used[g][i] = true;
            merge.push_back(eligible[g][i]->id);
        }
        plan.merges.push_back(std::move(merge));
    }
    return plan;
}

std::vector<EntityId> Dataset::connect(const ConnectPlan& plan) {
    if (plan.revision != revision_)
        throw Error("stale_plan", "plan was computed against revision " + std::to_string(plan.revision) +
                                      ", dataset is at revision " + std::to_string(revision_));
    if (plan.merges.empty()) return {};

    std::vector<Entity> merged;
    std::set<EntityId> consumed;
    for (const auto& sources : plan.merges) {
        Entity out{EntityId{}, std::vector<std::optional<double>>(variables_.size())};
        for (const auto& id : sources) {
            if (!consumed.insert(id).second) throw Error("invalid_argument", "entity " + to_string(id) + " merged twice");
            const Entity& src = entities_[entity_index(id)];
            for (std::size_t v = 0; v < variables_.size(); ++v) {
                if (!src.has(v)) continue;
                if (out.has(v)) throw Error("invalid_argument", "merge sources overlap on '" + variables_[v].name + "'");
                out.values[v] = src.values[v];
            }
        }
        merged.push_back(std::move(out));
    }

    std::erase_if(entities_, [&](const Entity& e) { return consumed.contains(e.id); });
    std::vector<EntityId> ids;
    for (auto& e : merged) {
        e.id = allocate_id();
        ids.push_back(e.id);
        entities_.push_back(std::move(e));
    }
    committed();
    return ids;
}

std::vector<EntityId> Dataset::query(const Selection& selection) const {
    std::vector<std::pair<std::size_t, Interval>> brushes;
    for (const auto& [name, interval] : selection.brushes) brushes.emplace_back(variable_index(name), interval);

    std::vector<EntityId> out;
    for (const auto& e : entities_) {
        if (e.complete() != (selection.mode == EntityMode::complete)) continue;
        const bool inside = std::all_of(brushes.begin(), brushes.end(), [&](const auto& b) {
            return e.has(b.first) && b.second.contains(*e.values[b.first]);
        });
        if (inside) out.push_back(e.id);
    }
    return out;
}

Eigen::MatrixXd Dataset::complete_rows(const ModelSpec& model) const {
    std::vector<std::size_t> columns;
    for (const auto& name : model.variables()) columns.push_back(variable_index(name));

    std::vector<const Entity*> rows;
    for (const auto& e : entities_) {
        if (std::all_of(columns.begin(), columns.end(), [&](std::size_t c) { return e.has(c); })) rows.push_back(&e);
    }
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < columns.size(); ++c)
            out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = *rows[r]->values[columns[c]];
    return out;
}

std::size_t Dataset::complete_count() const noexcept {
    return static_cast<std::size_t>(std::count_if(entities_.begin(), entities_.end(), [](const Entity& e) { return e.complete(); }));
}

void Dataset::verify() const {
    std::set<EntityId> ids;
    for (const auto& e : entities_) {
        if (!ids.insert(e.id).second) throw std::logic_error("duplicate entity id " + to_string(e.id));
        if (e.values.size() != variables_.size() || e.empty())
            throw std::logic_error("malformed entity " + to_string(e.id));
        for (std::size_t v = 0; v < variables_.size(); ++v)
            if (e.has(v) && !variables_[v].range.contains(*e.values[v]))
                throw std::logic_error("entity " + to_string(e.id) + " holds an out-of-range value");
    }
}

}  // namespace priorweaver
