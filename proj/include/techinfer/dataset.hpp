#ifndef TECHINFER_DATASET_HPP
#define TECHINFER_DATASET_HPP

#include <compare>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace techinfer {

/// ATT&CK technique id: `T` + 4 digits, optionally `.` + 3 digits.
class TechniqueId {
public:
    /// Throws Error(InvalidTechniqueId) when the text does not match.
    explicit TechniqueId(std::string id);

    [[nodiscard]] static bool is_valid(std::string_view text) noexcept;

    [[nodiscard]] const std::string& str() const noexcept { return id_; }
    auto operator<=>(const TechniqueId&) const = default;

private:
    std::string id_;
};

/// Opaque non-empty report identifier.
class ReportId {
public:
    explicit ReportId(std::string id);

    [[nodiscard]] const std::string& str() const noexcept { return id_; }
    auto operator<=>(const ReportId&) const = default;

private:
    std::string id_;
};

struct Observation {
    std::size_t entity = 0;
    std::size_t item = 0;

    auto operator<=>(const Observation&) const = default;
};

/// Catalogs plus a duplicate-free list of (entity, item) observations.
///
/// Observations keep their ingestion order so that writing a dataset out and
/// reading it back reproduces the catalogs exactly (catalogs are assigned in
/// first-appearance order). Split partitions share the source catalogs and may
/// therefore contain entities or items without observations.
class InteractionDataset {
public:
    InteractionDataset() = default;

    /// Validates bounds and uniqueness; throws Error(InvalidArgument).
    InteractionDataset(std::vector<ReportId> entities, std::vector<TechniqueId> items,
                       std::vector<Observation> observations);

    [[nodiscard]] std::size_t entity_count() const noexcept { return entities_.size(); }
    [[nodiscard]] std::size_t item_count() const noexcept { return items_.size(); }
    [[nodiscard]] std::size_t size() const noexcept { return observations_.size(); }

    [[nodiscard]] const std::vector<ReportId>& entities() const noexcept { return entities_; }
    [[nodiscard]] const std::vector<TechniqueId>& items() const noexcept { return items_; }
    [[nodiscard]] std::span<const Observation> observations() const noexcept { return observations_; }

    /// Same catalogs, different observation subset.
    [[nodiscard]] InteractionDataset with_observations(std::vector<Observation> observations) const;

private:
    std::vector<ReportId> entities_;
    std::vector<TechniqueId> items_;
    std::vector<Observation> observations_;
};

/// Accumulates (report, technique) string pairs into an InteractionDataset.
class DatasetBuilder {
public:
    /// Returns false when the pair was already present (and is collapsed).
    bool add(const ReportId& report, const TechniqueId& technique);

    [[nodiscard]] std::size_t duplicates_collapsed() const noexcept { return duplicates_; }
    [[nodiscard]] std::size_t size() const noexcept { return observations_.size(); }

    [[nodiscard]] InteractionDataset build() &&;

private:
    std::vector<ReportId> entities_;
    std::vector<TechniqueId> items_;
    std::unordered_map<std::string, std::size_t> entity_index_;
    std::unordered_map<std::string, std::size_t> item_index_;
    std::unordered_map<std::uint64_t, char> seen_;
    std::vector<Observation> observations_;
    std::size_t duplicates_ = 0;
};

enum class InputFormat { Csv, Jsonl };

[[nodiscard]] InputFormat parse_input_format(std::string_view text);

struct LoadDiagnostics {
    std::size_t records_read = 0;
    std::size_t duplicates_collapsed = 0;
};

struct LoadedDataset {
    InteractionDataset dataset;
    LoadDiagnostics diagnostics;
};

/// Parses CSV (`report_id,technique_id` header) or JSONL records.
/// Throws RecordError for malformed lines or bad ids, Error(EmptyInput) when no
/// record is present.
[[nodiscard]] LoadedDataset load_dataset(std::istream& source, InputFormat format);
[[nodiscard]] LoadedDataset load_dataset(std::string_view source, InputFormat format);

/// Writes the CSV form accepted by load_dataset, in observation order.
void write_csv(const InteractionDataset& dataset, std::ostream& out);

/// m×n binary matrix stored as per-row strictly increasing item lists.
class SparseBinaryMatrix {
public:
    SparseBinaryMatrix(std::size_t rows, std::size_t cols);
    SparseBinaryMatrix(std::size_t cols, std::vector<std::vector<std::size_t>> rows);

    [[nodiscard]] std::size_t rows() const noexcept { return rows_.size(); }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    [[nodiscard]] std::size_t nnz() const noexcept { return nnz_; }

    [[nodiscard]] std::span<const std::size_t> row(std::size_t i) const { return rows_[i]; }
    [[nodiscard]] bool contains(std::size_t i, std::size_t j) const;

    /// Per-column count of rows holding the item.
    [[nodiscard]] std::vector<std::size_t> column_counts() const;

    [[nodiscard]] SparseBinaryMatrix transposed() const;

private:
    std::size_t cols_;
    std::vector<std::vector<std::size_t>> rows_;
    std::size_t nnz_ = 0;
};

[[nodiscard]] SparseBinaryMatrix to_matrix(const InteractionDataset& dataset);

struct SplitDataset {
    InteractionDataset train;
    InteractionDataset validation;
    InteractionDataset test;
    std::uint64_t seed = 0;
};

/// Round-half-up of fraction·count.
[[nodiscard]] std::size_t partition_size(double fraction, std::size_t count);

/// Interaction-level random split. |test| = round(test_frac·N),
/// |validation| = round(val_frac·(N−|test|)), the rest is train. Entities left
/// without training observations are repaired by swapping one of their held-out
/// observations with a training observation of an entity that can spare one.
/// Throws Error(InfeasibleSplit) when |train| < m, Error(InvalidArgument) for
/// fractions out of range.
[[nodiscard]] SplitDataset split(const InteractionDataset& dataset, double test_frac, double val_frac,
                                 std::uint64_t seed);

enum class Partition { Train, Validation, Test };

/// CSV `report_id,technique_id,partition` over the union of the partitions.
void write_split_csv(const SplitDataset& split, std::ostream& out);
[[nodiscard]] SplitDataset load_split_csv(std::istream& source);

}  // namespace techinfer

#endif
