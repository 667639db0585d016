#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "json.hpp"
#include "portcast/errors.hpp"

namespace portcast::run {

inline nlohmann::json mat_to_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Eigen::MatrixXd mat_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.empty() || !j.at(0).is_array() || j.at(0).empty())
        throw DataError("bad matrix payload");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()),
                      static_cast<Eigen::Index>(j.at(0).size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const auto& row = j.at(static_cast<size_t>(i));
        if (static_cast<Eigen::Index>(row.size()) != m.cols())
            throw DataError("ragged matrix payload");
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            m(i, c) = row.at(static_cast<size_t>(c)).get<double>();
            if (!std::isfinite(m(i, c))) throw DataError("non-finite matrix entry");
        }
    }
    return m;
}

}  // namespace portcast::run
