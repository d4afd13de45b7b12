#include "gridshield/case_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <queue>
#include <sstream>

#include "json.hpp"

namespace gridshield {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

struct NumberRow {
    std::vector<double> values;
    int line;  // 1-based line number in the original text
};

// Strips '%' comments, locates "mpc.<name> = [ ... ];" blocks and returns the
// numeric rows (rows separated by ';' or newline).
class CaseScanner {
  public:
    explicit CaseScanner(const std::string& text) {
        std::istringstream in(text);
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            auto cut = line.find('%');
            if (cut != std::string::npos) line = line.substr(0, cut);
            lines_.push_back({line, line_no});
        }
    }

    bool find_scalar(const std::string& name, double& out) const {
        for (const auto& [text, line_no] : lines_) {
            auto pos = text.find("mpc." + name);
            if (pos == std::string::npos) continue;
            auto eq = text.find('=', pos);
            if (eq == std::string::npos) continue;
            std::string rest = text.substr(eq + 1);
            std::replace(rest.begin(), rest.end(), ';', ' ');
            std::istringstream v(rest);
            if (v >> out) return true;
            throw ParseError("line " + std::to_string(line_no) + ": cannot parse mpc." + name);
        }
        return false;
    }

    std::vector<NumberRow> find_matrix(const std::string& name) const {
        std::vector<NumberRow> rows;
        size_t i = 0;
        for (; i < lines_.size(); ++i) {
            const auto& text = lines_[i].first;
            auto pos = text.find("mpc." + name);
            if (pos == std::string::npos) continue;
            auto eq = text.find('=', pos);
            if (eq != std::string::npos && text.find('[', eq) != std::string::npos) break;
        }
        if (i == lines_.size()) throw ParseError("matrix mpc." + name + " not found");

        std::string pending;
        int pending_line = lines_[i].second;
        bool closed = false;
        // content after '[' on the opening line
        std::string first = lines_[i].first;
        first = first.substr(first.find('[') + 1);
        auto consume = [&](const std::string& chunk, int line_no) {
            for (char c : chunk) {
                if (c == ']') {
                    closed = true;
                    break;
                }
                if (c == ';') {
                    flush_row(rows, pending, pending_line, name);
                    pending.clear();
                    pending_line = line_no;
                } else {
                    if (pending.empty()) pending_line = line_no;
                    pending += c;
                }
            }
        };
        consume(first, lines_[i].second);
        for (size_t k = i + 1; k < lines_.size() && !closed; ++k) consume(lines_[k].first, lines_[k].second);
        if (!closed) throw ParseError("matrix mpc." + name + " is not terminated by ']'");
        flush_row(rows, pending, pending_line, name);
        return rows;
    }

  private:
    static void flush_row(std::vector<NumberRow>& rows, const std::string& chunk, int line_no,
                          const std::string& name) {
        std::istringstream in(chunk);
        NumberRow row;
        row.line = line_no;
        std::string tok;
        while (in >> tok) {
            std::replace(tok.begin(), tok.end(), ',', ' ');
            std::istringstream tin(tok);
            double v;
            while (tin >> v) row.values.push_back(v);
            if (!tin.eof()) {
                throw ParseError("line " + std::to_string(line_no) + ": malformed mpc." + name +
                                 " entry '" + tok + "'");
            }
        }
        if (!row.values.empty()) rows.push_back(std::move(row));
    }

    std::vector<std::pair<std::string, int>> lines_;
};

void require_columns(const NumberRow& row, size_t need, const std::string& name) {
    if (row.values.size() < need) {
        throw ParseError("line " + std::to_string(row.line) + ": mpc." + name + " row has " +
                         std::to_string(row.values.size()) + " columns, expected at least " +
                         std::to_string(need));
    }
}

void validate(const NetworkModel& m) {
    if (m.base_mva <= 0.0) throw ValidationError("base_mva must be positive");
    int slack_count = 0;
    for (const auto& bus : m.buses)
        if (bus.type == BusType::Slack) ++slack_count;
    if (slack_count == 0) throw ValidationError("missing slack bus");
    if (slack_count > 1) throw ValidationError("multiple slack buses");

    std::vector<int> degree(m.buses.size(), 0);
    std::vector<std::vector<int>> adj(m.buses.size());
    for (const auto& br : m.branches) {
        ++degree[br.from];
        ++degree[br.to];
        if (br.in_service) {
            adj[br.from].push_back(br.to);
            adj[br.to].push_back(br.from);
        }
    }
    if (m.buses.size() > 1) {
        for (size_t i = 0; i < m.buses.size(); ++i) {
            if (degree[i] == 0)
                throw ValidationError("disconnected bus " + std::to_string(m.buses[i].id) +
                                      ": referenced by no branch");
        }
        // in-service subgraph containing the slack must reach every bus
        std::vector<char> seen(m.buses.size(), 0);
        std::queue<int> q;
        q.push(m.slack());
        seen[m.slack()] = 1;
        size_t reached = 1;
        while (!q.empty()) {
            int u = q.front();
            q.pop();
            for (int w : adj[u])
                if (!seen[w]) {
                    seen[w] = 1;
                    ++reached;
                    q.push(w);
                }
        }
        if (reached != m.buses.size()) {
            for (size_t i = 0; i < m.buses.size(); ++i)
                if (!seen[i])
                    throw ValidationError("disconnected bus " + std::to_string(m.buses[i].id) +
                                          ": not reachable from the slack over in-service branches");
        }
    }
    for (const auto& bus : m.buses) {
        if (bus.type == BusType::PV && !m.has_inservice_gen(m.bus_index.at(bus.id)))
            throw ValidationError("PV bus " + std::to_string(bus.id) + " has no in-service generator");
    }
}

}  // namespace

int NetworkModel::slack() const {
    for (size_t i = 0; i < buses.size(); ++i)
        if (buses[i].type == BusType::Slack) return static_cast<int>(i);
    throw ValidationError("missing slack bus");
}

int NetworkModel::index_of(int external_id) const {
    auto it = bus_index.find(external_id);
    if (it == bus_index.end()) throw ValidationError("unknown bus id " + std::to_string(external_id));
    return it->second;
}

bool NetworkModel::has_inservice_gen(int bus_idx) const {
    for (const auto& g : gens)
        if (g.bus == bus_idx && g.in_service) return true;
    return false;
}

NetworkModel parse_case(const std::string& text) {
    CaseScanner scanner(text);
    NetworkModel m;
    if (!scanner.find_scalar("baseMVA", m.base_mva)) throw ParseError("mpc.baseMVA not found");
    if (m.base_mva <= 0.0) throw ValidationError("base_mva must be positive");

    for (const auto& row : scanner.find_matrix("bus")) {
        require_columns(row, 13, "bus");
        BusRecord bus;
        bus.id = static_cast<int>(row.values[0]);
        int type = static_cast<int>(row.values[1]);
        switch (type) {
            case 1: bus.type = BusType::PQ; break;
            case 2: bus.type = BusType::PV; break;
            case 3: bus.type = BusType::Slack; break;
            default:
                throw ParseError("line " + std::to_string(row.line) + ": unsupported bus type " +
                                 std::to_string(type));
        }
        bus.pd = row.values[2] / m.base_mva;
        bus.qd = row.values[3] / m.base_mva;
        bus.gs = row.values[4] / m.base_mva;
        bus.bs = row.values[5] / m.base_mva;
        bus.vm = row.values[7];
        bus.va = row.values[8] * kDegToRad;
        bus.base_kv = row.values[9];
        bus.vmax = row.values[11];
        bus.vmin = row.values[12];
        if (m.bus_index.count(bus.id))
            throw ParseError("line " + std::to_string(row.line) + ": duplicate bus id " +
                             std::to_string(bus.id));
        m.bus_index[bus.id] = static_cast<int>(m.buses.size());
        m.buses.push_back(bus);
    }
    if (m.buses.empty()) throw ParseError("mpc.bus is empty");

    for (const auto& row : scanner.find_matrix("gen")) {
        require_columns(row, 10, "gen");
        GenRecord g;
        g.bus_id = static_cast<int>(row.values[0]);
        auto it = m.bus_index.find(g.bus_id);
        if (it == m.bus_index.end())
            throw ParseError("line " + std::to_string(row.line) + ": generator at unknown bus " +
                             std::to_string(g.bus_id));
        g.bus = it->second;
        g.pg = row.values[1] / m.base_mva;
        g.qg = row.values[2] / m.base_mva;
        g.qmax = row.values[3] / m.base_mva;
        g.qmin = row.values[4] / m.base_mva;
        g.vg = row.values[5];
        g.in_service = row.values[7] > 0;
        m.gens.push_back(g);
    }

    for (const auto& row : scanner.find_matrix("branch")) {
        require_columns(row, 11, "branch");
        BranchRecord br;
        br.from_id = static_cast<int>(row.values[0]);
        br.to_id = static_cast<int>(row.values[1]);
        auto f = m.bus_index.find(br.from_id);
        auto t = m.bus_index.find(br.to_id);
        if (f == m.bus_index.end() || t == m.bus_index.end())
            throw ParseError("line " + std::to_string(row.line) + ": branch endpoint " +
                             std::to_string(f == m.bus_index.end() ? br.from_id : br.to_id) +
                             " is not a bus");
        br.from = f->second;
        br.to = t->second;
        br.r = row.values[2];
        br.x = row.values[3];
        br.b = row.values[4];
        br.tap = row.values[8];
        br.shift = row.values[9] * kDegToRad;
        br.in_service = row.values[10] > 0;
        m.branches.push_back(br);
    }

    validate(m);
    return m;
}

NetworkModel parse_case_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open case file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_case(buf.str());
}

std::string model_to_json(const NetworkModel& m) {
    nlohmann::json j;
    j["base_mva"] = m.base_mva;
    j["n_bus"] = m.n_bus();
    for (const auto& bus : m.buses) {
        j["buses"].push_back({{"id", bus.id},
                              {"type", bus.type == BusType::Slack ? "slack"
                                       : bus.type == BusType::PV  ? "PV"
                                                                  : "PQ"},
                              {"pd", bus.pd},
                              {"qd", bus.qd},
                              {"gs", bus.gs},
                              {"bs", bus.bs}});
    }
    for (const auto& br : m.branches) {
        j["branches"].push_back({{"from", br.from_id},
                                 {"to", br.to_id},
                                 {"r", br.r},
                                 {"x", br.x},
                                 {"b", br.b},
                                 {"tap", br.tap},
                                 {"shift", br.shift},
                                 {"in_service", br.in_service}});
    }
    for (const auto& g : m.gens) {
        j["gens"].push_back(
            {{"bus", g.bus_id}, {"pg", g.pg}, {"vg", g.vg}, {"in_service", g.in_service}});
    }
    return j.dump(2);
}

}  // namespace gridshield
