#include "techinfer/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "techinfer/error.hpp"
#include "techinfer/text.hpp"

namespace techinfer {

namespace {

bool is_digit(char ch) { return ch >= '0' && ch <= '9'; }

std::uint64_t pair_key(std::size_t entity, std::size_t item) {
    return (static_cast<std::uint64_t>(entity) << 32) | static_cast<std::uint64_t>(item);
}

void add_record(DatasetBuilder& builder, std::size_t line, std::string_view report,
                std::string_view technique) {
    report = text::trim(report);
    technique = text::trim(technique);
    if (report.empty()) {
        throw RecordError(ErrorCode::MalformedRecord, line, "empty report_id");
    }
    if (!TechniqueId::is_valid(technique)) {
        throw RecordError(ErrorCode::InvalidTechniqueId, line,
                          "invalid technique id '" + std::string(technique) + "'");
    }
    builder.add(ReportId(std::string(report)), TechniqueId(std::string(technique)));
}

LoadedDataset parse_csv(std::istream& source) {
    DatasetBuilder builder;
    LoadDiagnostics diagnostics;
    std::string raw;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(source, raw)) {
        ++line_no;
        auto line = text::normalize_line(raw, line_no == 1);
        if (text::trim(line).empty()) {
            continue;
        }
        auto fields = text::split_csv_record(line);
        if (!fields) {
            throw RecordError(ErrorCode::MalformedRecord, line_no, "unterminated quote");
        }
        if (!header_seen) {
            if (fields->size() != 2 || text::trim((*fields)[0]) != "report_id" ||
                text::trim((*fields)[1]) != "technique_id") {
                throw RecordError(ErrorCode::MalformedRecord, line_no,
                                  "expected header 'report_id,technique_id'");
            }
            header_seen = true;
            continue;
        }
        if (fields->size() != 2) {
            throw RecordError(ErrorCode::MalformedRecord, line_no,
                              "expected 2 fields, found " + std::to_string(fields->size()));
        }
        add_record(builder, line_no, (*fields)[0], (*fields)[1]);
        ++diagnostics.records_read;
    }
    if (builder.size() == 0) {
        throw Error(ErrorCode::EmptyInput, "dataset contains no records");
    }
    diagnostics.duplicates_collapsed = builder.duplicates_collapsed();
    return {std::move(builder).build(), diagnostics};
}

LoadedDataset parse_jsonl(std::istream& source) {
    DatasetBuilder builder;
    LoadDiagnostics diagnostics;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(source, raw)) {
        ++line_no;
        auto line = text::normalize_line(raw, line_no == 1);
        if (text::trim(line).empty()) {
            continue;
        }
        auto record = nlohmann::json::parse(line, nullptr, false);
        if (record.is_discarded() || !record.is_object()) {
            throw RecordError(ErrorCode::MalformedRecord, line_no, "not a JSON object");
        }
        auto report = record.find("report_id");
        auto technique = record.find("technique_id");
        if (report == record.end() || !report->is_string() || technique == record.end() ||
            !technique->is_string()) {
            throw RecordError(ErrorCode::MalformedRecord, line_no,
                              "expected string fields 'report_id' and 'technique_id'");
        }
        add_record(builder, line_no, report->get_ref<const std::string&>(),
                   technique->get_ref<const std::string&>());
        ++diagnostics.records_read;
    }
    if (builder.size() == 0) {
        throw Error(ErrorCode::EmptyInput, "dataset contains no records");
    }
    diagnostics.duplicates_collapsed = builder.duplicates_collapsed();
    return {std::move(builder).build(), diagnostics};
}

std::string_view partition_name(Partition p) {
    switch (p) {
        case Partition::Train: return "train";
        case Partition::Validation: return "validation";
        case Partition::Test: return "test";
    }
    return "train";
}

}  // namespace

TechniqueId::TechniqueId(std::string id) : id_(std::move(id)) {
    if (!is_valid(id_)) {
        throw Error(ErrorCode::InvalidTechniqueId, "invalid technique id '" + id_ + "'");
    }
}

bool TechniqueId::is_valid(std::string_view text) noexcept {
    if (text.size() != 5 && text.size() != 9) {
        return false;
    }
    if (text[0] != 'T' || !std::all_of(text.begin() + 1, text.begin() + 5, is_digit)) {
        return false;
    }
    return text.size() == 5 || (text[5] == '.' && std::all_of(text.begin() + 6, text.end(), is_digit));
}

ReportId::ReportId(std::string id) : id_(std::move(id)) {
    if (id_.empty()) {
        throw Error(ErrorCode::MalformedRecord, "report id must be non-empty");
    }
}

InteractionDataset::InteractionDataset(std::vector<ReportId> entities, std::vector<TechniqueId> items,
                                       std::vector<Observation> observations)
    : entities_(std::move(entities)), items_(std::move(items)), observations_(std::move(observations)) {
    std::vector<std::uint64_t> keys;
    keys.reserve(observations_.size());
    for (const auto& obs : observations_) {
        if (obs.entity >= entities_.size() || obs.item >= items_.size()) {
            throw Error(ErrorCode::InvalidArgument, "observation index out of catalog bounds");
        }
        keys.push_back(pair_key(obs.entity, obs.item));
    }
    std::sort(keys.begin(), keys.end());
    if (std::adjacent_find(keys.begin(), keys.end()) != keys.end()) {
        throw Error(ErrorCode::InvalidArgument, "duplicate observation");
    }
}

InteractionDataset InteractionDataset::with_observations(std::vector<Observation> observations) const {
    return InteractionDataset(entities_, items_, std::move(observations));
}

bool DatasetBuilder::add(const ReportId& report, const TechniqueId& technique) {
    auto [eit, new_entity] = entity_index_.try_emplace(report.str(), entities_.size());
    if (new_entity) {
        entities_.push_back(report);
    }
    auto [iit, new_item] = item_index_.try_emplace(technique.str(), items_.size());
    if (new_item) {
        items_.push_back(technique);
    }
    if (!seen_.try_emplace(pair_key(eit->second, iit->second), 0).second) {
        ++duplicates_;
        return false;
    }
    observations_.push_back({eit->second, iit->second});
    return true;
}

InteractionDataset DatasetBuilder::build() && {
    return InteractionDataset(std::move(entities_), std::move(items_), std::move(observations_));
}

InputFormat parse_input_format(std::string_view text) {
    if (text == "csv") {
        return InputFormat::Csv;
    }
    if (text == "jsonl") {
        return InputFormat::Jsonl;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown input format '" + std::string(text) + "'");
}

LoadedDataset load_dataset(std::istream& source, InputFormat format) {
    return format == InputFormat::Csv ? parse_csv(source) : parse_jsonl(source);
}

LoadedDataset load_dataset(std::string_view source, InputFormat format) {
    std::istringstream stream{std::string(source)};
    return load_dataset(stream, format);
}

void write_csv(const InteractionDataset& dataset, std::ostream& out) {
    out << "report_id,technique_id\n";
    for (const auto& obs : dataset.observations()) {
        out << text::csv_field(dataset.entities()[obs.entity].str()) << ','
            << dataset.items()[obs.item].str() << '\n';
    }
}

SparseBinaryMatrix::SparseBinaryMatrix(std::size_t rows, std::size_t cols) : cols_(cols), rows_(rows) {}

SparseBinaryMatrix::SparseBinaryMatrix(std::size_t cols, std::vector<std::vector<std::size_t>> rows)
    : cols_(cols), rows_(std::move(rows)) {
    for (auto& row : rows_) {
        std::sort(row.begin(), row.end());
        row.erase(std::unique(row.begin(), row.end()), row.end());
        if (!row.empty() && row.back() >= cols_) {
            throw Error(ErrorCode::InvalidArgument, "column index out of range");
        }
        nnz_ += row.size();
    }
}

bool SparseBinaryMatrix::contains(std::size_t i, std::size_t j) const {
    const auto& row = rows_[i];
    return std::binary_search(row.begin(), row.end(), j);
}

std::vector<std::size_t> SparseBinaryMatrix::column_counts() const {
    std::vector<std::size_t> counts(cols_, 0);
    for (const auto& row : rows_) {
        for (auto j : row) {
            ++counts[j];
        }
    }
    return counts;
}

SparseBinaryMatrix SparseBinaryMatrix::transposed() const {
    std::vector<std::vector<std::size_t>> cols(cols_);
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        for (auto j : rows_[i]) {
            cols[j].push_back(i);
        }
    }
    return SparseBinaryMatrix(rows_.size(), std::move(cols));
}

SparseBinaryMatrix to_matrix(const InteractionDataset& dataset) {
    std::vector<std::vector<std::size_t>> rows(dataset.entity_count());
    for (const auto& obs : dataset.observations()) {
        rows[obs.entity].push_back(obs.item);
    }
    return SparseBinaryMatrix(dataset.item_count(), std::move(rows));
}

std::size_t partition_size(double fraction, std::size_t count) {
    return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(count) + 0.5));
}

SplitDataset split(const InteractionDataset& dataset, double test_frac, double val_frac, std::uint64_t seed) {
    if (!(test_frac > 0.0 && test_frac < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "test fraction must lie in (0, 1)");
    }
    if (!(val_frac >= 0.0 && val_frac < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "validation fraction must lie in [0, 1)");
    }
    const auto observations = dataset.observations();
    const std::size_t total = observations.size();
    const std::size_t n_test = partition_size(test_frac, total);
    const std::size_t n_val = partition_size(val_frac, total - n_test);
    const std::size_t n_train = total - n_test - n_val;

    std::vector<std::size_t> per_entity(dataset.entity_count(), 0);
    for (const auto& obs : observations) {
        ++per_entity[obs.entity];
    }
    const auto active = static_cast<std::size_t>(
        std::count_if(per_entity.begin(), per_entity.end(), [](std::size_t c) { return c > 0; }));
    if (n_train < active) {
        throw Error(ErrorCode::InfeasibleSplit,
                    "training partition of " + std::to_string(n_train) + " observations cannot cover " +
                        std::to_string(active) + " entities");
    }

    std::mt19937_64 rng(seed);
    std::vector<std::size_t> order(total);
    for (std::size_t k = 0; k < total; ++k) {
        order[k] = k;
    }
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<Partition> assignment(total, Partition::Train);
    for (std::size_t k = 0; k < n_test; ++k) {
        assignment[order[k]] = Partition::Test;
    }
    for (std::size_t k = n_test; k < n_test + n_val; ++k) {
        assignment[order[k]] = Partition::Validation;
    }

    std::vector<std::size_t> train_count(dataset.entity_count(), 0);
    std::vector<std::vector<std::size_t>> held_out(dataset.entity_count());
    std::vector<std::size_t> train_positions;
    for (std::size_t k = 0; k < total; ++k) {
        if (assignment[k] == Partition::Train) {
            ++train_count[observations[k].entity];
            train_positions.push_back(k);
        } else {
            held_out[observations[k].entity].push_back(k);
        }
    }

    auto draw = [&rng](std::size_t bound) {
        return std::uniform_int_distribution<std::size_t>(0, bound - 1)(rng);
    };
    for (std::size_t e = 0; e < dataset.entity_count(); ++e) {
        if (per_entity[e] == 0 || train_count[e] > 0) {
            continue;
        }
        auto& mine = held_out[e];
        const std::size_t h_slot = draw(mine.size());
        const std::size_t h = mine[h_slot];

        // Rejection first; the eligible set is rebuilt only when it is sparse.
        std::size_t t_slot = train_positions.size();
        for (int attempt = 0; attempt < 64; ++attempt) {
            const std::size_t candidate = draw(train_positions.size());
            if (train_count[observations[train_positions[candidate]].entity] >= 2) {
                t_slot = candidate;
                break;
            }
        }
        if (t_slot == train_positions.size()) {
            std::vector<std::size_t> eligible;
            for (std::size_t s = 0; s < train_positions.size(); ++s) {
                if (train_count[observations[train_positions[s]].entity] >= 2) {
                    eligible.push_back(s);
                }
            }
            // Cannot be empty: |train| >= active entities and entity e holds none.
            t_slot = eligible[draw(eligible.size())];
        }
        const std::size_t t = train_positions[t_slot];
        const std::size_t donor = observations[t].entity;

        assignment[t] = assignment[h];
        assignment[h] = Partition::Train;
        --train_count[donor];
        ++train_count[e];
        train_positions[t_slot] = h;
        held_out[donor].push_back(t);
        mine.erase(mine.begin() + static_cast<std::ptrdiff_t>(h_slot));
    }

    std::vector<Observation> train, validation, test;
    train.reserve(n_train);
    validation.reserve(n_val);
    test.reserve(n_test);
    for (std::size_t k = 0; k < total; ++k) {
        switch (assignment[k]) {
            case Partition::Train: train.push_back(observations[k]); break;
            case Partition::Validation: validation.push_back(observations[k]); break;
            case Partition::Test: test.push_back(observations[k]); break;
        }
    }
    return SplitDataset{dataset.with_observations(std::move(train)),
                        dataset.with_observations(std::move(validation)),
                        dataset.with_observations(std::move(test)), seed};
}

void write_split_csv(const SplitDataset& split, std::ostream& out) {
    struct Row {
        Observation obs;
        Partition partition;
    };
    std::vector<Row> rows;
    for (auto [part, ds] : {std::pair{Partition::Train, &split.train},
                            std::pair{Partition::Validation, &split.validation},
                            std::pair{Partition::Test, &split.test}}) {
        for (const auto& obs : ds->observations()) {
            rows.push_back({obs, part});
        }
    }
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.obs < b.obs; });
    out << "report_id,technique_id,partition\n";
    for (const auto& row : rows) {
        out << text::csv_field(split.train.entities()[row.obs.entity].str()) << ','
            << split.train.items()[row.obs.item].str() << ',' << partition_name(row.partition) << '\n';
    }
}

SplitDataset load_split_csv(std::istream& source) {
    DatasetBuilder builder;
    std::vector<Partition> partitions;
    std::string raw;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(source, raw)) {
        ++line_no;
        auto line = text::normalize_line(raw, line_no == 1);
        if (text::trim(line).empty()) {
            continue;
        }
        auto fields = text::split_csv_record(line);
        if (!fields || fields->size() != 3) {
            throw RecordError(ErrorCode::MalformedRecord, line_no, "expected 3 fields");
        }
        if (!header_seen) {
            if ((*fields)[0] != "report_id" || (*fields)[1] != "technique_id" || (*fields)[2] != "partition") {
                throw RecordError(ErrorCode::MalformedRecord, line_no,
                                  "expected header 'report_id,technique_id,partition'");
            }
            header_seen = true;
            continue;
        }
        const auto part = text::trim((*fields)[2]);
        Partition partition;
        if (part == "train") {
            partition = Partition::Train;
        } else if (part == "validation") {
            partition = Partition::Validation;
        } else if (part == "test") {
            partition = Partition::Test;
        } else {
            throw RecordError(ErrorCode::MalformedRecord, line_no, "unknown partition '" + std::string(part) + "'");
        }
        const auto before = builder.size();
        add_record(builder, line_no, (*fields)[0], (*fields)[1]);
        if (builder.size() == before) {
            throw RecordError(ErrorCode::MalformedRecord, line_no, "observation listed twice");
        }
        partitions.push_back(partition);
    }
    if (builder.size() == 0) {
        throw Error(ErrorCode::EmptyInput, "split file contains no records");
    }
    auto all = std::move(builder).build();
    std::vector<Observation> train, validation, test;
    for (std::size_t k = 0; k < all.size(); ++k) {
        const auto& obs = all.observations()[k];
        switch (partitions[k]) {
            case Partition::Train: train.push_back(obs); break;
            case Partition::Validation: validation.push_back(obs); break;
            case Partition::Test: test.push_back(obs); break;
        }
    }
    return SplitDataset{all.with_observations(std::move(train)), all.with_observations(std::move(validation)),
                        all.with_observations(std::move(test)), 0};
}

}  // namespace techinfer
