#include "kronrec/rts.hpp"

#include "kronrec/errors.hpp"
#include "text_util.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

namespace kronrec {

void write_rts(std::ostream& out, const ReturnSet& R) {
    const auto& bits = R.bits();
    out << "RTS v1 " << R.window().lo << ' ' << R.window().hi << ' ' << bits.count() << '\n';
    if (!R.provenance().empty()) {
        for (const auto& line : detail::split(R.provenance(), '\n')) out << "# " << line << '\n';
    }
    std::ostringstream runs;
    runs << std::hex;
    bool current = false;
    std::size_t run = 0;
    bool first = true;
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i] == current) {
            ++run;
            continue;
        }
        runs << (first ? "" : " ") << run;
        first = false;
        current = !current;
        run = 1;
    }
    runs << (first ? "" : " ") << run;
    out << runs.str() << '\n';
}

std::string to_rts(const ReturnSet& R) {
    std::ostringstream out;
    write_rts(out, R);
    return out.str();
}

ReturnSet read_rts(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw Error("RTS: missing header");
    std::istringstream header(line);
    std::string magic, version;
    std::int64_t lo = 0, hi = 0;
    std::size_t count = 0;
    if (!(header >> magic >> version >> lo >> hi >> count) || magic != "RTS" || version != "v1") {
        throw Error("RTS: bad header '" + line + "'");
    }
    const Window w = Window::make(lo, hi);
    std::string provenance;
    std::string runs_line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.front() == '#') {
            std::string p = detail::trim(std::string_view(line).substr(1));
            provenance += (provenance.empty() ? "" : "\n") + p;
            continue;
        }
        if (detail::trim(line).empty()) continue;
        runs_line = line;
        break;
    }
    boost::dynamic_bitset<> bits(w.size());
    std::istringstream runs(runs_line);
    runs >> std::hex;
    std::size_t pos = 0;
    bool value = false;
    std::size_t run = 0;
    while (runs >> run) {
        if (pos + run > bits.size()) throw Error("RTS: runs exceed the window length");
        if (value) {
            for (std::size_t i = 0; i < run; ++i) bits.set(pos + i);
        }
        pos += run;
        value = !value;
    }
    if (!runs.eof()) throw Error("RTS: malformed run-length line");
    if (pos != bits.size()) throw Error("RTS: runs cover " + std::to_string(pos) + " of " + std::to_string(bits.size()) + " positions");
    if (bits.count() != count) throw Error("RTS: header count " + std::to_string(count) + " does not match " + std::to_string(bits.count()));
    return ReturnSet(w, std::move(bits), std::move(provenance));
}

ReturnSet parse_rts(const std::string& text) {
    std::istringstream in(text);
    return read_rts(in);
}

void save_rts(const std::filesystem::path& path, const ReturnSet& R) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    write_rts(out, R);
}

ReturnSet load_rts(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read " + path.string());
    return read_rts(in);
}

ReturnSet read_integer_list(std::istream& in, std::optional<Window> window) {
    std::vector<std::int64_t> members;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = detail::trim(line);
        if (t.empty() || t.front() == '#') continue;
        try {
            std::size_t used = 0;
            members.push_back(std::stoll(t, &used));
            if (used != t.size()) throw std::invalid_argument(t);
        } catch (const std::exception&) {
            throw Error("line " + std::to_string(lineno) + ": expected an integer, got '" + t + "'");
        }
    }
    std::sort(members.begin(), members.end());
    members.erase(std::unique(members.begin(), members.end()), members.end());
    if (!window) {
        if (members.empty()) throw Error("integer list is empty and no window was given");
        window = Window::make(members.front(), members.back());
    }
    return ReturnSet::from_members(*window, members, "integer list");
}

}  // namespace kronrec
