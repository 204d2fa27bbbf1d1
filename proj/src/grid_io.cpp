#include <fstream>
#include <sstream>

#include "json.hpp"

#include "spider/error.hpp"
#include "spider/semigroup.hpp"

namespace spider {

void write_grid_density(std::ostream& out, const GridDensity& phi, const std::string& manifest)
{
    nlohmann::json header;
    header["k"] = phi.k();
    header["h"] = phi.grid.h;
    header["n_cells"] = phi.grid.n_cells;
    header["leaked_mass"] = phi.leaked_mass;
    header["alpha"] = phi.config.alpha;
    header["edge_labels"] = phi.config.order;

    out << "# schema: " << kGridDensitySchema << '\n';
    out << "# header: " << header.dump() << '\n';
    if (!manifest.empty()) {
        out << "# manifest: " << manifest << '\n';
    }
    out << "i,j,cell,value\n";
    out.precision(17);
    for (int i = 0; i < phi.k(); ++i) {
        for (int j = 0; j < phi.k(); ++j) {
            auto c = phi.component(i, j);
            for (std::size_t n = 0; n < c.size(); ++n) {
                out << i << ',' << j << ',' << n << ',' << c[n] << '\n';
            }
        }
    }
}

void write_grid_density(const std::string& path, const GridDensity& phi, const std::string& manifest)
{
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot open " + path + " for writing");
    }
    write_grid_density(out, phi, manifest);
}

GridDensity read_grid_density(std::istream& in)
{
    std::string line;
    nlohmann::json header;
    bool have_schema = false;
    while (std::getline(in, line)) {
        if (line.rfind("# schema: ", 0) == 0) {
            if (line.substr(10) != kGridDensitySchema) {
                throw IoError("unsupported density schema: " + line.substr(10));
            }
            have_schema = true;
        } else if (line.rfind("# header: ", 0) == 0) {
            try {
                header = nlohmann::json::parse(line.substr(10));
            } catch (const nlohmann::json::exception& e) {
                throw IoError(std::string("bad density header: ") + e.what());
            }
        } else if (line.rfind('#', 0) == 0) {
            continue;
        } else {
            break;  // column names
        }
    }
    if (!have_schema || header.is_null()) {
        throw IoError("density file lacks schema or header line");
    }

    StarConfig config;
    Grid grid;
    try {
        config = validate_star_config(header.at("k").get<int>(), header.at("alpha").get<std::vector<double>>());
        if (header.contains("edge_labels")) {
            config.order = header.at("edge_labels").get<std::vector<int>>();
            config = validate_star_config(config);
        }
        grid = make_grid(header.at("h").get<double>(), header.at("n_cells").get<std::size_t>());
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("bad density header field: ") + e.what());
    }

    GridDensity phi = GridDensity::zeros(config, grid);
    phi.leaked_mass = header.value("leaked_mass", 0.0);
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        std::istringstream row(line);
        int i = 0;
        int j = 0;
        std::size_t n = 0;
        double v = 0.0;
        char c1 = 0;
        char c2 = 0;
        char c3 = 0;
        if (!(row >> i >> c1 >> j >> c2 >> n >> c3 >> v) || i < 0 || j < 0 || i >= config.k || j >= config.k ||
            n >= grid.n_cells) {
            throw IoError("bad density row: " + line);
        }
        phi.at(i, j, n) = v;
    }
    return phi;
}

GridDensity read_grid_density(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path);
    }
    return read_grid_density(in);
}

}  // namespace spider
