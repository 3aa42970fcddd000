/*
   Copyright 2026 The stoqpimc Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/
#pragma once

// Model files: INI documents read through Boost.PropertyTree.
//
//   [model]     family = tim | xy | general, n, boundary = open | periodic, xi
//   [fields]    gamma, kz                (n numbers each)
//   [bonds]     kxx, kyy, kzz            (one number per bond, xy family)
//   [couplings] any key = "j k value"    (1-based sites, tim family)
//   [general]   fictitious, h1 .. hB     (16 numbers, row-major 4x4 block)
//
// Numbers within a value are separated by spaces or commas.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "stoqpimc/error.hpp"
#include "stoqpimc/models.hpp"

namespace stoqpimc {

namespace detail {

inline double parse_number(std::string_view text, const std::string& where) {
    double value = 0.0;
    const char* first = text.data();
    const char* last = first + text.size();
    if (!text.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) throw Error(ErrorKind::Parse, where + ": '" + std::string(text) + "' is not a number");
    return value;
}

inline std::vector<double> parse_numbers(const std::string& text, const std::string& where) {
    std::vector<double> out;
    std::string token;
    auto flush = [&] {
        if (!token.empty()) out.push_back(parse_number(token, where));
        token.clear();
    };
    for (char ch : text) {
        if (ch == ',' || ch == ' ' || ch == '\t') flush();
        else token.push_back(ch);
    }
    flush();
    return out;
}

inline int parse_int(const std::string& text, const std::string& where) {
    const double v = parse_number(text, where);
    if (v != static_cast<double>(static_cast<long long>(v)) || v < -1e9 || v > 1e9)
        throw Error(ErrorKind::Parse, where + ": '" + text + "' is not an integer");
    return static_cast<int>(v);
}

inline std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string join_numbers(const std::vector<double>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ' ';
        out += format_number(values[i]);
    }
    return out;
}

using Tree = boost::property_tree::ptree;

inline const Tree* section(const Tree& root, const char* name) {
    const auto it = root.find(name);
    return it == root.not_found() ? nullptr : &it->second;
}

inline std::vector<double> numbers_or_empty(const Tree* sec, const char* key, const std::string& where) {
    if (!sec) return {};
    const auto value = sec->get_optional<std::string>(key);
    return value ? parse_numbers(*value, where + "." + key) : std::vector<double>{};
}

} // namespace detail

/// Parses a model document. Throws Parse on malformed input; the result is
/// validated before it is returned.
inline Model parse_model(std::istream& in) {
    detail::Tree root;
    try {
        boost::property_tree::ini_parser::read_ini(in, root);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw Error(ErrorKind::Parse, e.message() + " (line " + std::to_string(e.line()) + ")");
    }
    const detail::Tree* model = detail::section(root, "model");
    if (!model) throw Error(ErrorKind::Parse, "missing [model] section");
    const std::string family = model->get<std::string>("family", "tim");
    const auto nText = model->get_optional<std::string>("n");
    if (!nText) throw Error(ErrorKind::Parse, "[model] needs n");
    const int n = detail::parse_int(*nText, "model.n");
    if (n < 1) throw Error(ErrorKind::Parse, "model.n must be >= 1");
    const std::string boundaryText = model->get<std::string>("boundary", "open");
    Boundary boundary;
    if (boundaryText == "open") boundary = Boundary::open;
    else if (boundaryText == "periodic") boundary = Boundary::periodic;
    else throw Error(ErrorKind::Parse, "model.boundary must be open or periodic, got '" + boundaryText + "'");

    const detail::Tree* fields = detail::section(root, "fields");
    const auto gamma = detail::numbers_or_empty(fields, "gamma", "fields");
    const auto kz = detail::numbers_or_empty(fields, "kz", "fields");
    auto sized = [n](std::vector<double> v) { return v.empty() ? std::vector<double>(n, 0.0) : v; };

    Model out;
    if (family == "tim") {
        TransverseIsingModel m;
        m.n = n;
        m.boundary = boundary;
        m.xi = model->get_optional<std::string>("xi") ? detail::parse_number(model->get<std::string>("xi"), "model.xi") : 1.0;
        m.gamma = gamma;
        m.kz = sized(kz);
        if (const auto* couplings = detail::section(root, "couplings")) {
            for (const auto& [key, node] : *couplings) {
                const auto v = detail::parse_numbers(node.data(), "couplings." + key);
                if (v.size() != 3) throw Error(ErrorKind::Parse, "couplings." + key + " needs 'j k value'");
                const int j = detail::parse_int(detail::format_number(v[0]), "couplings." + key);
                const int k = detail::parse_int(detail::format_number(v[1]), "couplings." + key);
                if (j < 1 || j > n || k < 1 || k > n)
                    throw Error(ErrorKind::Parse, "couplings." + key + ": site index outside 1.." + std::to_string(n));
                m.set_coupling(j - 1, k - 1, v[2]);
            }
        }
        out = std::move(m);
    } else if (family == "xy") {
        XYChainModel m;
        m.n = n;
        m.boundary = boundary;
        m.gamma = sized(gamma);
        m.kz = sized(kz);
        const detail::Tree* bonds = detail::section(root, "bonds");
        const int b = bond_count(n, boundary);
        auto bondValues = [&](const char* key) {
            auto v = detail::numbers_or_empty(bonds, key, "bonds");
            return v.empty() ? std::vector<double>(b, 0.0) : v;
        };
        m.kxx = bondValues("kxx");
        m.kyy = bondValues("kyy");
        m.kzz = bondValues("kzz");
        out = std::move(m);
    } else if (family == "general") {
        GeneralChainModel m;
        m.n = n;
        m.boundary = boundary;
        const detail::Tree* general = detail::section(root, "general");
        if (!general) throw Error(ErrorKind::Parse, "family general needs a [general] section");
        if (const auto f = general->get_optional<std::string>("fictitious"))
            m.fictitiousField = detail::parse_number(*f, "general.fictitious");
        const int b = bond_count(n, boundary);
        for (int i = 1; i <= b; ++i) {
            const std::string key = "h" + std::to_string(i);
            const auto v = detail::numbers_or_empty(general, key.c_str(), "general");
            if (v.size() != 16) throw Error(ErrorKind::Parse, "general." + key + " needs 16 numbers");
            Mat4 h;
            for (int r = 0; r < 4; ++r)
                for (int c = 0; c < 4; ++c) h(r, c) = v[4 * r + c];
            m.terms.push_back(h);
        }
        out = std::move(m);
    } else {
        throw Error(ErrorKind::Parse, "model.family must be tim, xy or general, got '" + family + "'");
    }
    validate(out);
    return out;
}

inline Model load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Parse, "cannot open model file '" + path.string() + "'");
    return parse_model(in);
}

/// Writes a document that parse_model reads back to the same model.
inline std::string format_model(const Model& model) {
    std::ostringstream out;
    const int n = site_count(model);
    const std::string boundary = to_string(std::visit([](const auto& m) { return m.boundary; }, model));
    out << "[model]\nfamily = " << family_name(model) << "\nn = " << n << "\nboundary = " << boundary << "\n";
    if (const auto* m = std::get_if<TransverseIsingModel>(&model)) {
        out << "xi = " << detail::format_number(m->xi) << "\n\n[fields]\ngamma = " << detail::join_numbers(m->gamma)
            << "\nkz = " << detail::join_numbers(m->kz) << "\n\n[couplings]\n";
        int c = 1;
        for (const auto& [pair, value] : m->kzz)
            out << "c" << c++ << " = " << pair.first + 1 << " " << pair.second + 1 << " " << detail::format_number(value) << "\n";
    } else if (const auto* m = std::get_if<XYChainModel>(&model)) {
        out << "\n[fields]\ngamma = " << detail::join_numbers(m->gamma) << "\nkz = " << detail::join_numbers(m->kz)
            << "\n\n[bonds]\nkxx = " << detail::join_numbers(m->kxx) << "\nkyy = " << detail::join_numbers(m->kyy)
            << "\nkzz = " << detail::join_numbers(m->kzz) << "\n";
    } else {
        const auto& g = std::get<GeneralChainModel>(model);
        out << "\n[general]\nfictitious = " << detail::format_number(g.fictitiousField) << "\n";
        for (std::size_t b = 0; b < g.terms.size(); ++b) {
            std::vector<double> v(16);
            for (int r = 0; r < 4; ++r)
                for (int c = 0; c < 4; ++c) v[4 * r + c] = g.terms[b](r, c);
            out << "h" << b + 1 << " = " << detail::join_numbers(v) << "\n";
        }
    }
    return out.str();
}

} // namespace stoqpimc
