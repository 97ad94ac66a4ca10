#include "rowsolve/csvio.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace rowsolve {

std::string format_double(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw IoError("cannot parse number: '" + s + "'");
    return v;
}

void write_matrix_csv(const std::filesystem::path& file, const DenseMatrix& m) {
    std::ofstream out(file);
    if (!out) throw IoError("cannot open for writing: " + file.string());
    out << "# " << m.rows() << " " << m.cols() << "\n";
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j) out << ",";
            out << format_double(m(i, j));
        }
        out << "\n";
    }
    if (!out) throw IoError("write failed: " + file.string());
}

DenseMatrix read_matrix_csv(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open: " + file.string());
    std::string line;
    if (!std::getline(in, line) || line.size() < 2 || line[0] != '#')
        throw IoError("missing '# rows cols' header: " + file.string());
    std::istringstream hdr(line.substr(1));
    std::size_t rows = 0, cols = 0;
    if (!(hdr >> rows >> cols)) throw IoError("bad header: " + file.string());
    DenseMatrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        if (!std::getline(in, line)) throw IoError("truncated file: " + file.string());
        std::size_t pos = 0, j = 0;
        while (j < cols) {
            std::size_t comma = line.find(',', pos);
            std::string tok = (comma == std::string::npos) ? line.substr(pos)
                                                           : line.substr(pos, comma - pos);
            m(i, j++) = parse_double(tok);
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        if (j != cols) throw IoError("short row in " + file.string());
    }
    if (!m.all_finite()) throw IoError("non-finite entries in " + file.string());
    return m;
}

void write_vector_csv(const std::filesystem::path& file, const DenseVector& v) {
    DenseMatrix m(v.size(), 1);
    for (std::size_t i = 0; i < v.size(); ++i) m(i, 0) = v[i];
    write_matrix_csv(file, m);
}

DenseVector read_vector_csv(const std::filesystem::path& file) {
    DenseMatrix m = read_matrix_csv(file);
    if (m.cols() != 1) throw IoError("expected a single column in " + file.string());
    DenseVector v(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) v[i] = m(i, 0);
    return v;
}

}  // namespace rowsolve
