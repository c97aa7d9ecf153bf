#pragma once

#include <stdexcept>
#include <string>

namespace fairsample {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// dataset ingestion / validation
struct MalformedRecord : Error { using Error::Error; };
struct SchemaViolation : Error { using Error::Error; };
struct DuplicateStudentId : Error { using Error::Error; };
struct InconsistentFeatureDim : Error { using Error::Error; };

// grouping
struct UnknownAttribute : Error { using Error::Error; };
struct ClusterNotAssigned : Error { using Error::Error; };
struct EmptyDataset : Error { using Error::Error; };

// oversampling
struct EmptyGroups : Error { using Error::Error; };
struct PlanGroupMismatch : Error { using Error::Error; };
struct TargetBelowOriginal : Error { using Error::Error; };

// clustering
struct KTooLarge : Error { using Error::Error; };
struct DegenerateData : Error { using Error::Error; };
struct CoverageMismatch : Error { using Error::Error; };

// predictor
struct SingleClassFold : Error { using Error::Error; };
struct NonFiniteLoss : Error { using Error::Error; };
struct DimensionMismatch : Error { using Error::Error; };

// evaluation
struct TooFewRecords : Error { using Error::Error; };
struct SingleClass : Error { using Error::Error; };
struct AlignmentMismatch : Error { using Error::Error; };
struct EmptyCandidates : Error { using Error::Error; };

// synthetic data / pipeline
struct InvalidConfig : Error { using Error::Error; };
struct UnknownPreset : Error { using Error::Error; };
struct MissingArtifacts : Error { using Error::Error; };

}  // namespace fairsample
