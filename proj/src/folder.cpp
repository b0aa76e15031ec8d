#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>

#include "ccgm/core/errors.hpp"
#include "ccgm/data/dataset.hpp"

namespace ccgm::data {

namespace {

struct RawImage {
    std::size_t channels = 0, height = 0, width = 0;
    std::vector<float> pixels;  // CHW in [-1, 1]
};

int pnm_next_int(std::istream& in) {
    // Skips whitespace and '#' comments between header tokens.
    for (;;) {
        int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
    int value = 0;
    if (!(in >> value)) throw LoadError("malformed PNM header");
    return value;
}

RawImage read_pnm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open image: " + path.string());
    char p = 0, kind = 0;
    in.get(p);
    in.get(kind);
    if (p != 'P' || (kind != '5' && kind != '6'))
        throw LoadError("unsupported image format (want binary PGM/PPM): " + path.string());
    RawImage im;
    im.width = static_cast<std::size_t>(pnm_next_int(in));
    im.height = static_cast<std::size_t>(pnm_next_int(in));
    const int maxval = pnm_next_int(in);
    if (maxval <= 0 || maxval > 255) throw LoadError("unsupported PNM maxval: " + path.string());
    in.get();  // single whitespace after maxval
    im.channels = (kind == '6') ? 3 : 1;
    std::vector<unsigned char> raw(im.channels * im.height * im.width);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!in) throw LoadError("truncated image data: " + path.string());
    // Interleaved rows -> CHW, [0, maxval] -> [-1, 1].
    im.pixels.resize(raw.size());
    for (std::size_t y = 0; y < im.height; ++y)
        for (std::size_t x = 0; x < im.width; ++x)
            for (std::size_t c = 0; c < im.channels; ++c) {
                const auto v = static_cast<double>(raw[(y * im.width + x) * im.channels + c]);
                im.pixels[(c * im.height + y) * im.width + x] =
                    static_cast<float>(2.0 * v / static_cast<double>(maxval) - 1.0);
            }
    return im;
}

RawImage to_channels(RawImage im, std::size_t channels) {
    if (im.channels == channels) return im;
    RawImage out;
    out.channels = channels;
    out.height = im.height;
    out.width = im.width;
    out.pixels.resize(channels * im.height * im.width);
    const std::size_t plane = im.height * im.width;
    if (im.channels == 3 && channels == 1) {
        for (std::size_t i = 0; i < plane; ++i) {
            out.pixels[i] = static_cast<float>(0.299 * im.pixels[i] + 0.587 * im.pixels[plane + i] +
                                               0.114 * im.pixels[2 * plane + i]);
        }
    } else if (im.channels == 1 && channels == 3) {
        for (std::size_t c = 0; c < 3; ++c)
            std::copy_n(im.pixels.begin(), plane, out.pixels.begin() + static_cast<std::ptrdiff_t>(c * plane));
    } else {
        throw LoadError("unsupported channel conversion");
    }
    return out;
}

RawImage resize_bilinear(const RawImage& im, std::size_t side) {
    if (im.height == side && im.width == side) return im;
    RawImage out;
    out.channels = im.channels;
    out.height = side;
    out.width = side;
    out.pixels.resize(im.channels * side * side);
    for (std::size_t c = 0; c < im.channels; ++c) {
        for (std::size_t y = 0; y < side; ++y) {
            const double sy = (static_cast<double>(y) + 0.5) * static_cast<double>(im.height) /
                                  static_cast<double>(side) - 0.5;
            const double cy = std::clamp(sy, 0.0, static_cast<double>(im.height - 1));
            const auto y0 = static_cast<std::size_t>(cy);
            const std::size_t y1 = std::min(y0 + 1, im.height - 1);
            const double fy = cy - static_cast<double>(y0);
            for (std::size_t x = 0; x < side; ++x) {
                const double sx = (static_cast<double>(x) + 0.5) * static_cast<double>(im.width) /
                                      static_cast<double>(side) - 0.5;
                const double cx = std::clamp(sx, 0.0, static_cast<double>(im.width - 1));
                const auto x0 = static_cast<std::size_t>(cx);
                const std::size_t x1 = std::min(x0 + 1, im.width - 1);
                const double fx = cx - static_cast<double>(x0);
                auto at = [&](std::size_t yy, std::size_t xx) {
                    return static_cast<double>(im.pixels[(c * im.height + yy) * im.width + xx]);
                };
                const double v = (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x1)) +
                                 fy * ((1 - fx) * at(y1, x0) + fx * at(y1, x1));
                out.pixels[(c * side + y) * side + x] = static_cast<float>(v);
            }
        }
    }
    return out;
}

}  // namespace

Dataset load_folder(const std::filesystem::path& dir, const std::filesystem::path& labels_file,
                    const FolderOptions& options, FolderLoadReport* report) {
    std::ifstream in(labels_file);
    if (!in) throw LoadError("cannot open labels file: " + labels_file.string());

    FolderLoadReport local;
    FolderLoadReport& rep = report ? *report : local;

    std::vector<LabeledImage> images;
    std::vector<double> raws;
    std::string line;
    std::size_t lineno = 0;
    std::size_t listed = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t'))
            line.pop_back();
        if (line.empty()) continue;
        ++listed;

        auto sep = line.find_first_of("\t,");
        if (sep == std::string::npos) {
            rep.skipped_bad_label++;
            rep.warnings.push_back("line " + std::to_string(lineno) + ": no delimiter");
            continue;
        }
        const std::string fname = line.substr(0, sep);
        const std::string label_str = line.substr(sep + 1);
        double raw = 0.0;
        auto [ptr, ec] = std::from_chars(label_str.data(), label_str.data() + label_str.size(), raw);
        if (ec != std::errc() || ptr != label_str.data() + label_str.size()) {
            rep.skipped_bad_label++;
            rep.warnings.push_back("line " + std::to_string(lineno) + ": non-numeric label '" +
                                   label_str + "'");
            continue;
        }
        const auto path = dir / fname;
        if (!std::filesystem::exists(path)) {
            rep.skipped_missing++;
            rep.warnings.push_back("line " + std::to_string(lineno) + ": missing image " + fname);
            continue;
        }
        auto raw_im = resize_bilinear(
            to_channels(read_pnm(path), static_cast<std::size_t>(options.channels)),
            static_cast<std::size_t>(options.resolution));
        LabeledImage im;
        im.pixels = Tensor({raw_im.channels, raw_im.height, raw_im.width});
        std::copy(raw_im.pixels.begin(), raw_im.pixels.end(), im.pixels.flat().begin());
        im.label_raw = raw;
        im.id = fname;
        images.push_back(std::move(im));
        raws.push_back(raw);
    }

    if (listed == 0) throw LoadError("labels file lists no rows: " + labels_file.string());
    if (images.empty())
        throw LoadError("no listed image could be loaded from " + dir.string() + " (" +
                        std::to_string(rep.skipped_missing) + " missing, " +
                        std::to_string(rep.skipped_bad_label) + " bad labels)");

    auto space = LabelSpace::from_raw_labels(raws, options.bounds, options.kind_override);
    for (auto& im : images) im.label_norm = space.normalize(im.label_raw);
    rep.loaded = images.size();
    return Dataset(std::move(images), std::move(space));
}

}  // namespace ccgm::data
