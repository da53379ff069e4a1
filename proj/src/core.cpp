#include <reltrack/core.hpp>
#include <reltrack/error.hpp>

#include <algorithm>
#include <string>

namespace reltrack {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::BadMagic: return "BadMagic";
        case ErrorKind::DimMismatch: return "DimMismatch";
        case ErrorKind::NonFiniteValue: return "NonFiniteValue";
        case ErrorKind::EmptyImage: return "EmptyImage";
        case ErrorKind::ChannelMismatch: return "ChannelMismatch";
        case ErrorKind::TooManyLevels: return "TooManyLevels";
        case ErrorKind::OutOfGrid: return "OutOfGrid";
        case ErrorKind::DegenerateBox: return "DegenerateBox";
        case ErrorKind::SingularInnovation: return "SingularInnovation";
        case ErrorKind::EmptyBatch: return "EmptyBatch";
        case ErrorKind::NonFiniteGradient: return "NonFiniteGradient";
        case ErrorKind::NoPositivePairs: return "NoPositivePairs";
        case ErrorKind::EmptyGT: return "EmptyGT";
        case ErrorKind::NoEligibleTracks: return "NoEligibleTracks";
        case ErrorKind::OvercrowdedSpec: return "OvercrowdedSpec";
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::NonPositiveSize: return "NonPositiveSize";
        case ErrorKind::InvalidConfig: return "InvalidConfig";
        case ErrorKind::Io: return "Io";
    }
    return "Unknown";
}

BBox KalmanState::box() const {
    const Real h = mean(3);
    const Real w = mean(2) * h;
    return BBox::from_center(mean(0), mean(1), w, h);
}

void Tracklet::append(int frame, const BBox& box, int class_id, Real score) {
    if (!history.empty() && frame <= history.back().frame) {
        throw Error(ErrorKind::DimMismatch, "tracklet " + std::to_string(id) + ": frame " + std::to_string(frame) +
                                                " does not follow " + std::to_string(history.back().frame));
    }
    history.push_back({frame, box, class_id, score});
    ++class_counts[class_id];
}

Real iou(const BBox& a, const BBox& b) {
    if (a == b) return 1;
    const Real ix = std::max<Real>(0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
    const Real iy = std::max<Real>(0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
    const Real inter = ix * iy;
    if (inter <= 0) return 0;
    return std::min<Real>(1, inter / (a.area() + b.area() - inter));
}

BBox grid_box(const BBox& box, Real stride) {
    return {box.x / stride, box.y / stride, box.w / stride, box.h / stride};
}

}  // namespace reltrack
