#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "loctomo/checkpoint.hpp"
#include "loctomo/commands.hpp"
#include "loctomo/errors.hpp"
#include "loctomo/fbp.hpp"
#include "loctomo/forward.hpp"
#include "loctomo/metrics.hpp"
#include "loctomo/mrc.hpp"
#include "loctomo/reconstruct.hpp"
#include "loctomo/wavelet.hpp"

namespace py = pybind11;
using namespace loctomo;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// Volumes cross the boundary as (nz, ny, nx) arrays, tilt stacks as
// (n_tilts, height, width); both are x-fastest so no transposition is needed.
Volume to_volume(const Array& a, double voxel_size) {
  if (a.ndim() != 3) throw InvalidArgument("volume must be a 3-D array (nz, ny, nx)");
  const Dims3 d{static_cast<int>(a.shape(2)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0))};
  return Volume(d, voxel_size, std::vector<double>(a.data(), a.data() + a.size()));
}

Array from_volume(const Volume& v) {
  const Dims3& d = v.dims();
  Array out({d.nz, d.ny, d.nx});
  std::copy(v.data().begin(), v.data().end(), out.mutable_data());
  return out;
}

TiltSeries to_series(const Array& a, const std::vector<double>& angles, double pixel, bool filtered) {
  if (a.ndim() != 3) throw InvalidArgument("tilt stack must be a 3-D array (n_tilts, height, width)");
  if (static_cast<std::size_t>(a.shape(0)) != angles.size())
    throw InvalidArgument("stack has " + std::to_string(a.shape(0)) + " projections but " +
                          std::to_string(angles.size()) + " angles were given");
  DetectorSpec det;
  det.width = static_cast<int>(a.shape(2));
  det.height = static_cast<int>(a.shape(1));
  det.pixel_x = det.pixel_y = pixel;
  TiltSeries ts(det, angles);
  std::copy(a.data(), a.data() + a.size(), ts.data.begin());
  ts.filtered = filtered;
  return ts;
}

Array from_series(const TiltSeries& ts) {
  Array out({static_cast<py::ssize_t>(ts.count()), static_cast<py::ssize_t>(ts.detector.height),
             static_cast<py::ssize_t>(ts.detector.width)});
  std::copy(ts.data.begin(), ts.data.end(), out.mutable_data());
  return out;
}

Dims3 shape_dims(const std::vector<int>& shape) {
  if (shape.size() != 3) throw InvalidArgument("shape must be (nz, ny, nx)");
  return Dims3{shape[2], shape[1], shape[0]};
}

RunConfig make_config(const py::dict& overrides) {
  RunConfig c;
  for (const auto& [k, v] : overrides) {
    const std::string key = py::str(k);
    std::string value = py::str(v);
    if (py::isinstance<py::bool_>(v)) value = v.cast<bool>() ? "true" : "false";
    c.set(key, value);
  }
  c.validate();
  return c;
}

py::object to_python(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

NoiseModel noise_model(const std::string& kind, double sigma, double dose, std::uint64_t seed) {
  return NoiseModel{parse_noise(kind), sigma, dose, seed};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Localized learned tomographic reconstruction: simulation, FBP, network inference, metrics and I/O.";

  static py::exception<Error> base(m, "Error", PyExc_RuntimeError);
  static py::exception<InvalidArgument> invalid(m, "InvalidArgument", PyExc_ValueError);
  static py::exception<FormatError> format(m, "FormatError", base.ptr());
  static py::exception<CorruptionError> corrupt(m, "CorruptionError", format.ptr());
  static py::exception<IoError> io(m, "IoError", base.ptr());
  static py::exception<DivergenceError> diverge(m, "DivergenceError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const CorruptionError& e) {
      py::set_error(corrupt, e.what());
    } catch (const FormatError& e) {
      py::set_error(format, e.what());
    } catch (const InvalidArgument& e) {
      py::set_error(invalid, e.what());
    } catch (const IoError& e) {
      py::set_error(io, e.what());
    } catch (const DivergenceError& e) {
      py::set_error(diverge, e.what());
    } catch (const Error& e) {
      py::set_error(base, e.what());
    }
  });

  m.def("tilt_range", &tilt_range_deg, py::arg("lo_deg"), py::arg("hi_deg"), py::arg("step_deg"),
        "Inclusive tilt angles in radians.");

  m.def(
      "make_phantom",
      [](const std::string& kind, const std::vector<int>& shape, int count, std::uint64_t seed, double lo,
         double hi) {
        PhantomSpec s;
        s.kind = parse_phantom(kind);
        s.size = shape_dims(shape);
        s.count = count;
        s.seed = seed;
        s.density_lo = lo;
        s.density_hi = hi;
        return from_volume(make_phantom(s));
      },
      py::arg("kind") = "spheres", py::arg("shape") = std::vector<int>{64, 64, 64}, py::arg("count") = 12,
      py::arg("seed") = 0, py::arg("density_lo") = 0.5, py::arg("density_hi") = 1.5);

  m.def(
      "project",
      [](const Array& volume, const std::vector<double>& angles, double step, double kernel_width, int width,
         int height) {
        const Volume v = to_volume(volume, 1.0);
        DetectorSpec det;
        det.width = width > 0 ? width : v.dims().nx;
        det.height = height > 0 ? height : v.dims().ny;
        det.kernel_width = kernel_width;
        py::gil_scoped_release release;
        TiltSeries ts = project(v, angles, det, step);
        py::gil_scoped_acquire acquire;
        return from_series(ts);
      },
      py::arg("volume"), py::arg("angles"), py::arg("step") = 0.5, py::arg("kernel_width") = 0.0,
      py::arg("width") = 0, py::arg("height") = 0, "Line-integral projections, shape (n_tilts, height, width).");

  m.def(
      "add_noise",
      [](const Array& stack, const std::string& kind, double sigma, double dose, std::uint64_t seed) {
        const TiltSeries ts = to_series(stack, std::vector<double>(static_cast<std::size_t>(stack.shape(0)), 0.0),
                                        1.0, false);
        return from_series(apply_noise(ts, noise_model(kind, sigma, dose, seed)));
      },
      py::arg("stack"), py::arg("kind") = "gaussian", py::arg("sigma") = 1.0, py::arg("dose") = 1.0,
      py::arg("seed") = 0);

  m.def(
      "add_noise_pair",
      [](const Array& stack, const std::string& kind, double sigma, double dose, std::uint64_t seed) {
        const TiltSeries ts = to_series(stack, std::vector<double>(static_cast<std::size_t>(stack.shape(0)), 0.0),
                                        1.0, false);
        auto [a, b] = apply_noise_pair(ts, noise_model(kind, sigma, dose, seed));
        return py::make_tuple(from_series(a), from_series(b));
      },
      py::arg("stack"), py::arg("kind") = "gaussian", py::arg("sigma") = 1.0, py::arg("dose") = 1.0,
      py::arg("seed") = 0, "Two independent noise realisations of the same stack.");

  m.def(
      "filter_stack",
      [](const Array& stack, const std::string& window, int pad_factor) {
        const TiltSeries ts = to_series(stack, std::vector<double>(static_cast<std::size_t>(stack.shape(0)), 0.0),
                                        1.0, false);
        return from_series(filter_tilt_series(ts, FilterSpec{parse_filter(window), pad_factor}));
      },
      py::arg("stack"), py::arg("window") = "cosine_ramp", py::arg("pad_factor") = 2);

  m.def(
      "backproject",
      [](const Array& filtered, const std::vector<double>& angles, const std::vector<int>& shape, double voxel_size) {
        const TiltSeries ts = to_series(filtered, angles, voxel_size, true);
        py::gil_scoped_release release;
        Volume v = backproject(ts, shape_dims(shape), voxel_size);
        py::gil_scoped_acquire acquire;
        return from_volume(v);
      },
      py::arg("filtered"), py::arg("angles"), py::arg("shape"), py::arg("voxel_size") = 1.0);

  m.def(
      "fbp",
      [](const Array& stack, const std::vector<double>& angles, std::optional<std::vector<int>> shape,
         const std::string& window, int pad_factor, double voxel_size) {
        const TiltSeries ts = to_series(stack, angles, voxel_size, false);
        const Dims3 d = shape ? shape_dims(*shape) : Dims3{ts.detector.width, ts.detector.height, ts.detector.width};
        py::gil_scoped_release release;
        Volume v = fbp(ts, FilterSpec{parse_filter(window), pad_factor}, d, voxel_size);
        py::gil_scoped_acquire acquire;
        return from_volume(v);
      },
      py::arg("stack"), py::arg("angles"), py::arg("shape") = py::none(), py::arg("window") = "cosine_ramp",
      py::arg("pad_factor") = 2, py::arg("voxel_size") = 1.0,
      "Filtered backprojection; default shape is (width, height, width) in (nz, ny, nx) order.");

  m.def(
      "fsc",
      [](const Array& a, const Array& b, int n_shells, double pixel_size, std::optional<std::vector<int>> mask) {
        std::optional<Box> box;
        if (mask) {
          if (mask->size() != 6) throw InvalidArgument("mask must be (x0, y0, z0, x1, y1, z1)");
          const auto& m6 = *mask;
          box = Box{m6[0], m6[1], m6[2], m6[3], m6[4], m6[5]};
        }
        const FscCurve c = fsc(to_volume(a, pixel_size), to_volume(b, pixel_size), n_shells, box ? &*box : nullptr);
        py::dict out;
        out["frequency"] = c.shell_centers;
        out["fsc"] = c.values;
        out["count"] = c.counts;
        out["empty"] = c.empty;
        out["pixel_size"] = c.pixel_size;
        out["resolution_0.5"] = resolution_at(c, 0.5);
        out["resolution_0.143"] = resolution_at(c, 0.143);
        return out;
      },
      py::arg("a"), py::arg("b"), py::arg("n_shells") = 0, py::arg("pixel_size") = 1.0, py::arg("mask") = py::none(),
      "FSC curve plus 0.5 / 0.143 resolutions in Angstrom (None when not crossed).");

  m.def(
      "mse", [](const Array& a, const Array& b) { return mse(to_volume(a, 1.0), to_volume(b, 1.0)); }, py::arg("a"),
      py::arg("b"));
  m.def(
      "psnr", [](const Array& a, const Array& b) { return psnr(to_volume(a, 1.0), to_volume(b, 1.0)); },
      py::arg("reference"), py::arg("b"));
  m.def(
      "pearson", [](const Array& a, const Array& b) { return pearson(to_volume(a, 1.0), to_volume(b, 1.0)); },
      py::arg("a"), py::arg("b"));

  m.def(
      "dwt3",
      [](const Array& volume, const std::string& family) {
        const SubbandSet s = dwt3(to_volume(volume, 1.0), WaveletBank::named(family));
        py::list bands;
        for (const auto& b : s.bands) bands.append(from_volume(b));
        return bands;
      },
      py::arg("volume"), py::arg("family") = "bior2.2",
      "Eight subbands, index bits (x, y, z) high-pass = (4, 2, 1).");

  m.def(
      "idwt3",
      [](const std::vector<Array>& bands, const std::string& family, std::optional<std::vector<int>> shape) {
        if (bands.size() != 8) throw InvalidArgument("idwt3 needs 8 subbands");
        SubbandSet s;
        for (std::size_t i = 0; i < 8; ++i) s.bands[i] = to_volume(bands[i], 1.0);
        const Dims3& c = s.bands[0].dims();
        s.padded = Dims3{2 * c.nx, 2 * c.ny, 2 * c.nz};
        s.parent = shape ? shape_dims(*shape) : s.padded;
        return from_volume(idwt3(s, WaveletBank::named(family)));
      },
      py::arg("bands"), py::arg("family") = "bior2.2", py::arg("shape") = py::none());

  m.def(
      "read_mrc",
      [](const std::filesystem::path& path) {
        const MrcData d = read_mrc(path);
        Array out({d.header.nz, d.header.ny, d.header.nx});
        std::copy(d.values.begin(), d.values.end(), out.mutable_data());
        return py::make_tuple(out, d.header.voxel_size());
      },
      py::arg("path"), "Returns (array (nz, ny, nx), voxel size in Angstrom).");
  m.def(
      "write_mrc",
      [](const Array& volume, const std::filesystem::path& path, double voxel_size) {
        write_mrc(to_volume(volume, voxel_size), path);
      },
      py::arg("volume"), py::arg("path"), py::arg("voxel_size") = 1.0);
  m.def("read_tlt", &read_tlt, py::arg("path"), "Angles in radians.");
  m.def(
      "write_tlt", [](const std::vector<double>& angles, const std::filesystem::path& path) { write_tlt(angles, path); },
      py::arg("angles"), py::arg("path"));

  py::class_<Checkpoint>(m, "Model")
      .def_static("load", &load_checkpoint, py::arg("path"))
      .def("save", [](const Checkpoint& c, const std::filesystem::path& p) { save_checkpoint(c, p); }, py::arg("path"))
      .def_property_readonly("mode", [](const Checkpoint& c) { return to_string(c.mode); })
      .def_property_readonly("wavelet", [](const Checkpoint& c) { return c.wavelet; })
      .def_property_readonly("parameter_count", [](const Checkpoint& c) { return c.params.parameter_count(); })
      .def_property_readonly("patch_size", [](const Checkpoint& c) { return c.params.config().patch_size; })
      .def_property_readonly("out_dim", [](const Checkpoint& c) { return c.params.config().out_dim; })
      .def(
          "forward",
          [](const Checkpoint& c, const Array& patches, const std::vector<double>& angles) {
            if (patches.ndim() != 3 || patches.shape(1) != patches.shape(2))
              throw InvalidArgument("patches must be (n_tilts, P, P)");
            PatchStack s;
            s.patch_size = static_cast<int>(patches.shape(1));
            s.angles = angles;
            s.data.assign(patches.data(), patches.data() + patches.size());
            const Eigen::VectorXd y = slice_mlp_forward(c.params, s);
            return std::vector<double>(y.data(), y.data() + y.size());
          },
          py::arg("patches"), py::arg("angles"), "Network output for one (n_tilts, P, P) patch stack.")
      .def(
          "reconstruct",
          [](const Checkpoint& c, const Array& stack, const std::vector<double>& angles,
             std::optional<std::vector<int>> shape, double voxel_size, int chunk_size) {
            const TiltSeries raw = to_series(stack, angles, voxel_size, false);
            const TiltSeries filtered = filter_tilt_series(normalize_unit_std(raw), c.filter);
            const Dims3 d = shape ? shape_dims(*shape)
                                  : Dims3{raw.detector.width, raw.detector.height, raw.detector.width};
            ReconOptions opts;
            opts.patch_spacing = c.patch_spacing;
            opts.chunk_size = chunk_size;
            py::gil_scoped_release release;
            Volume v = c.mode == ReconMode::wavelet
                           ? reconstruct_wavelet(c.params, filtered, d, voxel_size, WaveletBank::named(c.wavelet), opts)
                           : reconstruct_pixel(c.params, filtered, d, voxel_size, opts);
            py::gil_scoped_acquire acquire;
            return from_volume(v);
          },
          py::arg("stack"), py::arg("angles"), py::arg("shape") = py::none(), py::arg("voxel_size") = 1.0,
          py::arg("chunk_size") = 4096, "Normalises and filters the raw stack, then evaluates the network.");

  // Pipeline commands: config keys as keyword overrides, report returned as a dict.
  m.def(
      "simulate_to",
      [](const std::filesystem::path& out_dir, const py::dict& config) {
        return to_python(cmd_simulate(make_config(config), SimulateArgs{out_dir}));
      },
      py::arg("out_dir"), py::arg("config") = py::dict());
  m.def(
      "train_to",
      [](const std::filesystem::path& checkpoint, const std::vector<std::filesystem::path>& data_dirs, int simulate,
         const py::dict& config) {
        TrainArgs a;
        a.data_dirs = data_dirs;
        a.simulate = simulate;
        a.checkpoint = checkpoint;
        const RunConfig c = make_config(config);
        nlohmann::json report;
        {
          py::gil_scoped_release release;
          report = cmd_train(c, a);
        }
        return to_python(report);
      },
      py::arg("checkpoint"), py::arg("data_dirs") = std::vector<std::filesystem::path>{}, py::arg("simulate") = 0,
      py::arg("config") = py::dict());
  m.def(
      "config_defaults",
      []() {
        py::dict out;
        for (const auto& [k, v] : RunConfig{}.entries()) out[py::str(k)] = v;
        return out;
      },
      "Every config key with its default value (as text).");
}
