// Fixed Gauss-Legendre rules on [-1, 1], tabulated to double precision.
#pragma once

#include <array>

namespace fermires::detail {

struct GLNode {
  double x;
  double w;
};

inline constexpr std::array<GLNode, 10> kGL10{{
    {-0.9739065285171717, 0.06667134430868807},
    {-0.8650633666889845, 0.14945134915058036},
    {-0.6794095682990244, 0.219086362515982},
    {-0.4333953941292472, 0.2692667193099965},
    {-0.14887433898163122, 0.295524224714753},
    {0.14887433898163122, 0.295524224714753},
    {0.4333953941292472, 0.2692667193099965},
    {0.6794095682990244, 0.219086362515982},
    {0.8650633666889845, 0.14945134915058036},
    {0.9739065285171717, 0.06667134430868807},
}};

inline constexpr std::array<GLNode, 12> kGL12{{
    {-0.9815606342467192, 0.04717533638651202},
    {-0.9041172563704748, 0.10693932599531888},
    {-0.7699026741943047, 0.1600783285433461},
    {-0.5873179542866175, 0.20316742672306565},
    {-0.3678314989981802, 0.23349253653835464},
    {-0.1252334085114689, 0.2491470458134027},
    {0.1252334085114689, 0.2491470458134027},
    {0.3678314989981802, 0.23349253653835464},
    {0.5873179542866175, 0.20316742672306565},
    {0.7699026741943047, 0.1600783285433461},
    {0.9041172563704748, 0.10693932599531888},
    {0.9815606342467192, 0.04717533638651202},
}};

inline constexpr std::array<GLNode, 24> kGL24{{
    {-0.9951872199970213, 0.012341229799987091},
    {-0.9747285559713095, 0.028531388628933743},
    {-0.9382745520027328, 0.04427743881741955},
    {-0.886415527004401, 0.05929858491543674},
    {-0.820001985973903, 0.07334648141108041},
    {-0.7401241915785544, 0.08619016153195329},
    {-0.6480936519369755, 0.09761865210411406},
    {-0.5454214713888396, 0.1074442701159656},
    {-0.4337935076260451, 0.11550566805372561},
    {-0.3150426796961634, 0.12167047292780342},
    {-0.1911188674736163, 0.1258374563468283},
    {-0.06405689286260563, 0.12793819534675221},
    {0.06405689286260563, 0.12793819534675221},
    {0.1911188674736163, 0.1258374563468283},
    {0.3150426796961634, 0.12167047292780342},
    {0.4337935076260451, 0.11550566805372561},
    {0.5454214713888396, 0.1074442701159656},
    {0.6480936519369755, 0.09761865210411406},
    {0.7401241915785544, 0.08619016153195329},
    {0.820001985973903, 0.07334648141108041},
    {0.886415527004401, 0.05929858491543674},
    {0.9382745520027328, 0.04427743881741955},
    {0.9747285559713095, 0.028531388628933743},
    {0.9951872199970213, 0.012341229799987091},
}};

inline constexpr std::array<GLNode, 32> kGL32{{
    {-0.9972638618494816, 0.007018610009469298},
    {-0.9856115115452684, 0.016274394730905965},
    {-0.9647622555875064, 0.025392065309262427},
    {-0.9349060759377397, 0.034273862913021626},
    {-0.8963211557660522, 0.042835898022226426},
    {-0.84936761373257, 0.050998059262376244},
    {-0.7944837959679424, 0.058684093478535704},
    {-0.7321821187402897, 0.06582222277636175},
    {-0.6630442669302152, 0.07234579410884845},
    {-0.5877157572407623, 0.07819389578707031},
    {-0.5068999089322294, 0.08331192422694685},
    {-0.42135127613063533, 0.08765209300440391},
    {-0.33186860228212767, 0.09117387869576386},
    {-0.23928736225213706, 0.09384439908080457},
    {-0.1444719615827965, 0.09563872007927483},
    {-0.04830766568773831, 0.09654008851472781},
    {0.04830766568773831, 0.09654008851472781},
    {0.1444719615827965, 0.09563872007927483},
    {0.23928736225213706, 0.09384439908080457},
    {0.33186860228212767, 0.09117387869576386},
    {0.42135127613063533, 0.08765209300440391},
    {0.5068999089322294, 0.08331192422694685},
    {0.5877157572407623, 0.07819389578707031},
    {0.6630442669302152, 0.07234579410884845},
    {0.7321821187402897, 0.06582222277636175},
    {0.7944837959679424, 0.058684093478535704},
    {0.84936761373257, 0.050998059262376244},
    {0.8963211557660522, 0.042835898022226426},
    {0.9349060759377397, 0.034273862913021626},
    {0.9647622555875064, 0.025392065309262427},
    {0.9856115115452684, 0.016274394730905965},
    {0.9972638618494816, 0.007018610009469298},
}};

}  // namespace fermires::detail
